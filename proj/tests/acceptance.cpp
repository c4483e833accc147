// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cascade_support.hpp"
#include "commands.hpp"
#include "gradient_check.hpp"
#include "irispad/error.hpp"
#include "irispad/imaging.hpp"
#include "json.hpp"
#include "metric_oracles.hpp"
#include "network_oracle.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace irispad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "missing " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json json_of(const fs::path& p) { return nlohmann::json::parse(bytes_of(p)); }

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

int cli_run(std::vector<std::string> args, std::ostream& log) {
  std::ostringstream out;
  const int code = cli::run(args, out, log);
  if (code != 0) throw Error(ErrorKind::invalid_input, "command failed with exit " + std::to_string(code) + ": " + args[0]);
  return code;
}

// ---- 1 ----
Outcome metric_oracle_equivalence() {
  std::mt19937_64 gen(101);
  std::size_t checks = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + gen() % 199;
    const auto samples = oracle::random_scores(gen, n, trial % 3 == 0);
    // threshold either drawn fresh or placed exactly on a score
    const double tau = trial % 2 ? samples[gen() % n].bf_score : std::uniform_real_distribution<double>(0, 1)(gen);
    auto check = [&](bool ok) {
      ++checks;
      if (!ok) ++mismatches;
    };
    std::set<PaiClass> present;
    for (const auto& s : samples) {
      if (s.is_attack) present.insert(*s.pai);
    }
    for (auto pai : present) {
      std::vector<metrics::ScoredSample> one;
      for (const auto& s : samples) {
        if (s.is_attack && *s.pai == pai) one.push_back(s);
      }
      check(metrics::apcer_rate(one, tau) == oracle::apcer(samples, pai, tau));
      check(metrics::apcer_per_pai(samples, tau).at(pai) == oracle::apcer(samples, pai, tau));
    }
    check(metrics::apcer_pooled_rate(samples, tau) == oracle::apcer_pooled(samples, tau));
    check(metrics::bpcer_rate(samples, tau) == oracle::bpcer(samples, tau));
    const auto worst = metrics::apcer_worst_rate(samples, tau);
    check(worst == oracle::apcer_worst(samples, tau));
    const auto expected_acer = (oracle::apcer_worst(samples, tau).second + oracle::bpcer(samples, tau)) / Fraction(2);
    check(metrics::acer(worst.second, metrics::bpcer_rate(samples, tau)) == expected_acer);
  }
  return {mismatches == 0, std::to_string(checks) + " exact comparisons, " + std::to_string(mismatches) + " mismatches"};
}

// ---- 2 ----
Outcome acer_fixture() {
  const bool exact = metrics::acer(1.00, 0.00) == 0.50;
  const bool row1_flagged = !metrics::acer_consistent(3.03, 1.70, 2.81);
  const bool row2_clean = metrics::acer_consistent(1.00, 0.00, 0.50);
  return {exact && row1_flagged && row2_clean,
          "acer(1.00, 0.00) = " + num(metrics::acer(1.00, 0.00)) + ", row #1 recomputes to " +
              num(metrics::acer(3.03, 1.70)) + (row1_flagged ? " and is flagged" : " and was NOT flagged")};
}

// ---- 3 ----
Outcome eer_properties() {
  using metrics::ScoredSample;
  std::vector<ScoredSample> separable;
  for (int i = 0; i < 20; ++i) {
    separable.push_back({"b" + std::to_string(i), false, std::nullopt, 0.6 + 0.01 * i});
    separable.push_back({"a" + std::to_string(i), true, PaiClass::Printed, 0.1 + 0.01 * i});
  }
  const bool sep_ok = metrics::det_curve(separable).eer_rate == Fraction(0);

  std::mt19937_64 gen(303);
  bool identical_ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoredSample> twin;
    const std::size_t n = 1 + gen() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = static_cast<double>(gen() % 11) / 10.0;
      twin.push_back({"b" + std::to_string(i), false, std::nullopt, s});
      twin.push_back({"a" + std::to_string(i), true, PaiClass::Cadaver, s});
    }
    identical_ok = identical_ok && metrics::det_curve(twin).eer_rate == Fraction(1, 2);
  }

  bool invariant_ok = true, oracle_ok = true;
  const std::vector<std::function<double(double)>> transforms = {
      [](double s) { return s * s * s; }, [](double s) { return std::sqrt(s); },
      [](double s) { return 0.25 + 0.5 * s; }};
  for (int trial = 0; trial < 100; ++trial) {
    auto samples = oracle::random_scores(gen, 2 + gen() % 150, trial % 2 == 0);
    const auto base = metrics::det_curve(samples).eer_rate;
    oracle_ok = oracle_ok && base == oracle::eer(samples);
    for (const auto& f : transforms) {
      auto moved = samples;
      for (auto& s : moved) s.bf_score = f(s.bf_score);
      invariant_ok = invariant_ok && metrics::det_curve(moved).eer_rate == base;
    }
  }
  return {sep_ok && identical_ok && invariant_ok && oracle_ok,
          std::string("separable ") + (sep_ok ? "0" : "!=0") + ", identical multisets " +
              (identical_ok ? "exactly 1/2" : "off") + ", 100 sets x 3 transforms " +
              (invariant_ok ? "invariant" : "NOT invariant") + ", brute-force sweep " + (oracle_ok ? "agrees" : "differs")};
}

// ---- 4 ----
Outcome clahe_oracle() {
  int global_ok = 0;
  for (int i = 0; i < 50; ++i) {
    std::mt19937_64 gen(400 + i);
    const int w = 4 + static_cast<int>(gen() % 60), h = 4 + static_cast<int>(gen() % 60);
    const int lo = static_cast<int>(gen() % 128), hi = lo + static_cast<int>(gen() % (256 - lo));
    const auto img = test::random_image(w, h, 500 + i, lo, hi);
    if (clahe(img, {1, 1, 256.0}) == oracle::global_equalization(img)) ++global_ok;
  }
  int centers = 0, centers_ok = 0;
  for (int i = 0; i < 10; ++i) {
    const auto img = test::random_image(33, 33, 600 + i);
    const auto out = clahe(img, {3, 3, 2.0});
    for (int ty = 0; ty < 3; ++ty) {
      for (int tx = 0; tx < 3; ++tx) {
        const int x = 5 + 11 * tx, y = 5 + 11 * ty;
        ++centers;
        if (out.at(x, y) == oracle::tile_lut(img, 3, 3, tx, ty, 2.0)[img.at(x, y)]) ++centers_ok;
      }
    }
  }
  int constants_ok = 0;
  for (int v : {0, 1, 77, 128, 254, 255}) {
    const GrayImage flat(40, 24, static_cast<std::uint8_t>(v));
    if (clahe(flat, ClaheParams{}) == flat) ++constants_ok;
  }
  return {global_ok == 50 && centers_ok == centers && constants_ok == 6,
          std::to_string(global_ok) + "/50 bit-exact global equalizations, " + std::to_string(centers_ok) + "/" +
              std::to_string(centers) + " tile centres, " + std::to_string(constants_ok) + "/6 constant fixed points"};
}

// ---- 5 ----
Outcome class_weight_identity() {
  std::mt19937_64 gen(505);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    LabelCounts counts;
    const int k = 2 + static_cast<int>(gen() % 5);
    std::size_t total = 0;
    for (int c = 0; c < k; ++c) total += counts[c] = 1 + gen() % 20000;
    Fraction sum;
    for (const auto& [label, w] : class_weight_fractions(counts)) {
      sum = sum + w * Fraction(static_cast<Fraction::Int>(counts[label]));
    }
    if (sum == Fraction(static_cast<Fraction::Int>(total))) ++ok;
  }
  bool balanced = true;
  for (int k = 2; k <= 6; ++k) {
    LabelCounts counts;
    for (int c = 0; c < k; ++c) counts[c] = 37;
    for (const auto& [label, w] : class_weights(counts)) balanced = balanced && w == 1.0;
  }
  return {ok == 100 && balanced,
          std::to_string(ok) + "/100 exact identities, balanced counts " + (balanced ? "all 1.0" : "not 1.0")};
}

// ---- 6 ----
Outcome gradient_check() {
  std::string detail;
  bool pass = true;
  for (auto pooling : {Pooling::global_max, Pooling::global_avg}) {
    NetConfig config;
    config.input_size = 32;
    config.alpha = 1.0;
    config.n_classes = 3;
    config.pooling = pooling;
    const std::vector<int> labels = {0, 2};
    const std::vector<double> weights = {1.0, 2.0, 0.5};
    const auto r = test::smooth_gradient_check(config, labels, weights, 1e-4, 21);
    pass = pass && r.kinked == 0 && r.parameters == parameter_count(config) && r.worst_relative_error < 1e-4;
    if (!detail.empty()) detail += "; ";
    detail += std::string(to_string(pooling)) + ": " + std::to_string(r.parameters) + " parameters, max rel err " +
              num(r.worst_relative_error);
  }
  return {pass, detail};
}

// ---- 7 ----
Outcome alpha_scaling() {
  auto count = [](double alpha) {
    NetConfig c;
    c.input_size = 64;
    c.n_classes = 4;
    c.alpha = alpha;
    return parameter_count(c);
  };
  const auto p05 = count(0.5), p10 = count(1.0), p14 = count(1.4);
  const bool ordered = p14 > p10 && p10 > p05;
  const bool rounding = scaled_channels(32, 1.4) == 48 && oracle::make_divisible(32 * 1.4) == 48;
  const bool identity = scale_plan(default_channel_plan(), 1.0) == default_channel_plan();
  return {ordered && rounding && identity,
          "params " + std::to_string(p05) + " < " + std::to_string(p10) + " < " + std::to_string(p14) +
              ", scaled_channels(32, 1.4) = " + std::to_string(scaled_channels(32, 1.4)) +
              (identity ? ", alpha 1.0 keeps the base plan" : ", alpha 1.0 changes the plan")};
}

// ---- 8 / 10 ----
struct DeskRun {
  fs::path root;
  double seconds = 0.0;
  double test_accuracy = 0.0;
  nlohmann::json report;
};

DeskRun desk_run(const fs::path& root, std::ostream& log) {
  const auto t0 = Clock::now();
  fs::remove_all(root);
  DeskRun run{root, 0.0, 0.0, {}};
  const auto data = (root / "data").string();
  cli_run({"synth", "--out", data, "--per-class", "400", "--val-per-class", "100", "--test-per-class", "100",
           "--seed", "7"},
          log);
  const auto manifest = (root / "data" / "manifest.csv").string();
  auto train = [&](const std::string& protocol, const std::string& out) {
    cli_run({"train", "--manifest", manifest, "--out", (root / out).string(), "--protocol", protocol, "--alpha", "1.0",
             "--input-size", "64", "--optimizer", "adam", "--lr", "1e-3", "--epochs", "20", "--patience", "5",
             "--batch-size", "32", "--seed", "7"},
            log);
  };
  train("four_class", "stage2");
  train("two_class", "stage1");
  cli_run({"eval", "--manifest", manifest, "--stage1", (root / "stage1" / "model.bin").string(), "--stage2",
           (root / "stage2" / "model.bin").string(), "--fusion", "and", "--tau1", "0.5", "--out",
           (root / "eval").string()},
          log);
  run.test_accuracy = json_of(root / "stage2" / "summary.json")["test"]["accuracy"];
  run.report = json_of(root / "eval" / "report.json");
  run.seconds = seconds_since(t0);
  return run;
}

Outcome end_to_end(const DeskRun& run) {
  const double apcer = run.report["apcer_worst"], pooled = run.report["apcer_pooled"], bpcer = run.report["bpcer"];
  const bool pass = run.test_accuracy >= 0.95 && apcer <= 5.0 && bpcer <= 5.0 && run.seconds < 600.0;
  return {pass, "four-class test accuracy " + num(100 * run.test_accuracy) + "%, cascade APCER worst " + num(apcer) +
                    "% (pooled " + num(pooled) + "%), BPCER " + num(bpcer) + "%, " + num(run.seconds) + " s"};
}

Outcome determinism(const DeskRun& a, const DeskRun& b) {
  const char* files[] = {"stage1/model.bin",   "stage2/model.bin", "stage1/history.csv", "stage2/history.csv",
                         "stage1/summary.json", "stage2/summary.json", "eval/scores.csv", "eval/report.json",
                         "eval/det.csv",        "eval/kde.csv",     "eval/det.svg",       "eval/kde.svg",
                         "data/manifest.csv"};
  int same = 0, total = 0;
  std::string differing;
  for (const char* f : files) {
    ++total;
    if (bytes_of(a.root / f) == bytes_of(b.root / f)) {
      ++same;
    } else {
      differing += std::string(" ") + f;
    }
  }
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " artifacts bit-identical" +
                             (differing.empty() ? "" : ", differing:" + differing)};
}

// ---- 9 ----
Outcome cascade_inclusion() {
  Rng rng(909);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = make_grouping(trial % 2 ? Protocol::four_class : Protocol::three_class);
    const auto batch = test::random_scored_batch(rng, g, 10 + static_cast<std::size_t>(rng.uniform_int(0, 190)));
    const double tau1 = static_cast<double>(rng.uniform_int(0, 20)) / 20.0;
    const auto r = test::check_inclusions(batch, g, tau1);
    if (r.and_holds && r.or_holds && r.intersection_holds) ++ok;
  }
  return {ok == 100, std::to_string(ok) + "/100 batches satisfy both inclusions"};
}

// ---- 11 ----
Outcome leave_one_out(const fs::path& desk_root, const fs::path& root, std::ostream& log) {
  fs::remove_all(root);
  const auto manifest = (desk_root / "data" / "manifest.csv").string();
  auto train = [&](const std::string& protocol, const std::string& out) {
    cli_run({"train", "--manifest", manifest, "--out", (root / out).string(), "--protocol", protocol, "--input-size",
             "64", "--lr", "1e-3", "--epochs", "8", "--patience", "3", "--seed", "11", "--hold-out", "contact"},
            log);
  };
  train("two_class", "stage1");
  train("four_class", "stage2");
  cli_run({"eval", "--manifest", manifest, "--stage1", (root / "stage1" / "model.bin").string(), "--stage2",
           (root / "stage2" / "model.bin").string(), "--hold-out", "contact", "--out", (root / "eval").string()},
          log);

  // every id a model saw, checked against the manifest's ground truth
  std::map<std::string, PaiClass> truth;
  for (const auto& r : load_manifest(manifest)) truth[r.id] = r.pai;
  std::size_t seen = 0, leaked = 0;
  for (const char* stage : {"stage1", "stage2"}) {
    std::istringstream rows(bytes_of(root / stage / "samples.csv"));
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
      const auto id = line.substr(0, line.find(','));
      ++seen;
      if (truth.at(id) == PaiClass::ContactLens) ++leaked;
    }
  }
  const auto report = json_of(root / "eval" / "report.json");
  const double eer = report["eer"];
  const int held_out = report["pai_counts"].value("contact", 0);
  const bool pass = std::isfinite(eer) && leaked == 0 && seen > 0 && held_out == 600;
  return {pass, "EER on unknown contact lenses " + num(eer) + "% over " + std::to_string(held_out) +
                    " held-out samples; " + std::to_string(leaked) + " of " + std::to_string(seen) +
                    " training/validation ids are contact lenses"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "irispad_acceptance";
  std::set<int> only;
  bool verbose = false;
  app.add_option("--work-dir", work, "Scratch directory for the desk runs");
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--verbose", verbose, "Show command logs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  std::ostringstream quiet;
  std::ostream& log = verbose ? std::cerr : quiet;
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (limit_s > 0 && s >= limit_s) {
      o.pass = false;
      o.detail += ", over the " + num(limit_s) + " s budget";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << " (" << num(s)
              << " s)" << std::endl;
  };

  report(1, "metric oracle equivalence", 10, metric_oracle_equivalence);
  report(2, "reported ACER fixture", 0, acer_fixture);
  report(3, "EER properties", 5, eer_properties);
  report(4, "CLAHE oracle", 10, clahe_oracle);
  report(5, "class-weight identity", 0, class_weight_identity);
  report(6, "gradient check", 60, gradient_check);
  report(7, "alpha scaling", 0, alpha_scaling);

  std::optional<DeskRun> first;
  if (wanted(8) || wanted(10) || wanted(11)) {
    report(8, "end-to-end desk run", 600, [&] {
      first = desk_run(work / "desk_a", log);
      return end_to_end(*first);
    });
  }
  report(9, "cascade set inclusion", 0, cascade_inclusion);
  if (wanted(10)) {
    report(10, "determinism", 0, [&] {
      if (!first) throw Error(ErrorKind::configuration, "first desk run did not complete");
      const auto second = desk_run(work / "desk_b", log);
      return determinism(*first, second);
    });
  }
  report(11, "leave-one-out protocol", 0, [&] {
    if (!first) throw Error(ErrorKind::configuration, "desk run did not complete");
    return leave_one_out(first->root, work / "loo", log);
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
