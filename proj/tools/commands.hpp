#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "irispad/cascade.hpp"
#include "irispad/dataset.hpp"
#include "irispad/error.hpp"
#include "irispad/network.hpp"
#include "irispad/synth.hpp"
#include "irispad/train.hpp"

namespace irispad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitMetric = 3;
inline constexpr int kExitFailures = 4;
inline constexpr int kExitInternal = 1;

int exit_code_for(ErrorKind kind);

// Entry point behind main(); `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Every command writes into a run directory and leaves stamp.json there.
struct RunOptions {
  std::filesystem::path out;
  std::vector<std::string> command_line;  // echoed into the stamp
};

struct IngestOptions : RunOptions {
  std::filesystem::path dir;
  std::string sensor = "unknown";
};
// Writes <out>/manifest.csv from a <split>/<pai>/<files> tree.
int cmd_ingest(const IngestOptions& options, std::ostream& log);

struct SynthOptions : RunOptions {
  SynthConfig config;
};
int cmd_synth(const SynthOptions& options, std::ostream& log);

struct PreprocessOptions : RunOptions {
  std::filesystem::path manifest;
  int input_size = 224;
  ClaheParams clahe;
};
int cmd_preprocess(const PreprocessOptions& options, std::ostream& log);

struct AugmentOptions : RunOptions {
  std::filesystem::path in_dir;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;  // overrides the seed from the config file
  int copies = 1;
};
int cmd_augment(const AugmentOptions& options, std::ostream& log);

struct TrainOptions : RunOptions {
  std::filesystem::path manifest;
  Protocol protocol = Protocol::four_class;
  NetConfig net;
  TrainConfig train;
  ClaheParams clahe;
  std::optional<PaiClass> hold_out;
  std::optional<std::filesystem::path> augment_config;
  bool class_weighting = true;
};
// Writes model.bin, history.csv, summary.json and samples.csv (the ids
// trained and validated on).
int cmd_train(const TrainOptions& options, std::ostream& log);

struct ScoreOptions : RunOptions {
  std::filesystem::path manifest;
  std::filesystem::path stage1;
  std::filesystem::path stage2;
  double tau1 = 0.5;
  Fusion fusion = Fusion::and_;
  std::optional<Split> split = Split::Test;  // nullopt scores every split
  std::optional<PaiClass> hold_out;          // score the unknown-species set instead
};
// Writes scores.csv and failures.csv.
int cmd_score(const ScoreOptions& options, std::ostream& log);

struct EvaluateOptions : RunOptions {
  std::filesystem::path scores;
  double tau1 = 0.5;
  bool plots = true;
};
// Writes report.json, det.csv, kde.csv and the SVG plots.
int cmd_evaluate(const EvaluateOptions& options, std::ostream& log);

// score followed by evaluate in one run directory.
int cmd_eval(const ScoreOptions& options, bool plots, std::ostream& log);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace irispad::cli
