"""Runs a small pipeline with the irispad binary and validates report.json against the schema."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema


def run(tool, *args):
    result = subprocess.run([tool, *args], capture_output=True, text=True)
    if result.returncode != 0:
        sys.exit(f"{' '.join(args[:1])} failed ({result.returncode}):\n{result.stderr}")


def main():
    tool, schema_path, work = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    data = work / "data"
    run(tool, "synth", "--out", str(data), "--per-class", "16", "--val-per-class", "4",
        "--test-per-class", "6", "--seed", "5")
    manifest = str(data / "manifest.csv")
    for protocol, out in (("two_class", "s1"), ("four_class", "s2"), ("three_class", "s3")):
        run(tool, "train", "--manifest", manifest, "--out", str(work / out), "--protocol", protocol,
            "--input-size", "32", "--lr", "1e-3", "--epochs", "2", "--seed", "1")
    run(tool, "train", "--manifest", manifest, "--out", str(work / "loo"), "--protocol", "four_class",
        "--input-size", "32", "--lr", "1e-3", "--epochs", "1", "--hold-out", "cadaver")

    cases = {
        "four_class": ["--stage2", str(work / "s2" / "model.bin")],
        "three_class_or": ["--stage2", str(work / "s3" / "model.bin"), "--fusion", "or", "--tau1", "0.3"],
        "leave_one_out": ["--stage2", str(work / "loo" / "model.bin"), "--hold-out", "cadaver"],
    }
    failures = 0
    for name, extra in cases.items():
        out = work / f"eval_{name}"
        run(tool, "eval", "--manifest", manifest, "--stage1", str(work / "s1" / "model.bin"),
            "--out", str(out), *extra)
        report = json.loads((out / "report.json").read_text())
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        for e in errors:
            print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += len(errors)
        print(f"{name}: {'valid' if not errors else 'INVALID'}")

    # a broken report must be rejected, or the check proves nothing
    broken = json.loads((work / "eval_four_class" / "report.json").read_text())
    broken["bpcer"] = 140.0
    if validator.is_valid(broken):
        print("schema accepted a report with BPCER above 100%")
        failures += 1
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
