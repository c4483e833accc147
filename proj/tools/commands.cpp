#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "irispad/augment.hpp"
#include "irispad/error.hpp"
#include "irispad/model_io.hpp"
#include "json.hpp"
#include "report.hpp"

namespace irispad::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

void prepare_out(const RunOptions& o) {
  if (o.out.empty()) throw Error(ErrorKind::configuration, "an output directory is required");
  fs::create_directories(o.out);
}

std::string sha256_bytes(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::io, "SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

// Digest over every image a run reads, in manifest order.
ordered_json image_digest(const std::vector<SampleRecord>& records) {
  std::string lines;
  std::size_t readable = 0;
  for (const auto& r : records) {
    std::string digest = "missing";
    if (fs::is_regular_file(r.path)) {
      digest = sha256_file(r.path);
      ++readable;
    }
    lines += r.id + '\t' + digest + '\n';
  }
  return {{"count", records.size()}, {"readable", readable}, {"sha256", sha256_bytes(lines)}};
}

struct Stamp {
  std::string command;
  ordered_json config = ordered_json::object();
  ordered_json seeds = ordered_json::object();
  std::vector<fs::path> inputs;
  const std::vector<SampleRecord>* images = nullptr;
};

void write_stamp(const RunOptions& o, const Stamp& s) {
  ordered_json j;
  j["tool"] = "irispad";
  j["version"] = kToolVersion;
  j["command"] = s.command;
  j["command_line"] = o.command_line;
  j["config"] = s.config;
  j["seeds"] = s.seeds;
  auto inputs = ordered_json::array();
  for (const auto& p : s.inputs) inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  j["inputs"] = inputs;
  if (s.images) j["images"] = image_digest(*s.images);
  write_text(o.out / "stamp.json", j.dump(2) + "\n");
}

ordered_json clahe_json(const ClaheParams& c) {
  return {{"tiles_x", c.tiles_x}, {"tiles_y", c.tiles_y}, {"clip_limit", c.clip_limit}};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_image_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".png" || ext == ".pgm";
}

// Records the stage-2 grouping can score, minus the held-out species.
std::vector<SampleRecord> mapped_only(const std::vector<SampleRecord>& records, const ClassGrouping& g,
                                      std::optional<PaiClass> excluded) {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (g.label_of(r.pai) && r.pai != excluded) out.push_back(r);
  }
  return out;
}

ordered_json grouping_json(const ClassGrouping& g) {
  ordered_json j;
  j["name"] = g.name;
  j["labels"] = g.label_names;
  auto mapping = ordered_json::object();
  for (auto pai : kAllPaiClasses) {
    if (auto l = g.label_of(pai)) mapping[std::string(to_string(pai))] = *l;
  }
  j["mapping"] = mapping;
  return j;
}

std::size_t failure_limit(std::size_t total) {
  // more than 1% unreadable fails the run
  return total / 100;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::undefined_metric ? kExitMetric : kExitInput;
}

std::string sha256_file(const fs::path& path) { return sha256_bytes(read_text(path)); }

// ---- ingest ----

int cmd_ingest(const IngestOptions& o, std::ostream& log) {
  if (!fs::is_directory(o.dir)) throw Error(ErrorKind::io, "not a directory: " + o.dir.string());
  std::vector<fs::path> split_dirs;
  for (const auto& e : fs::directory_iterator(o.dir)) {
    if (e.is_directory()) split_dirs.push_back(e.path());
  }
  std::sort(split_dirs.begin(), split_dirs.end());

  std::vector<std::string> offenders;
  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  for (const auto& sd : split_dirs) {
    const auto split = parse_split(sd.filename().string());
    if (!split) {
      offenders.push_back(sd.filename().string() + " (not a split)");
      continue;
    }
    std::vector<fs::path> pai_dirs;
    for (const auto& e : fs::directory_iterator(sd)) {
      if (e.is_directory()) pai_dirs.push_back(e.path());
    }
    std::sort(pai_dirs.begin(), pai_dirs.end());
    for (const auto& pd : pai_dirs) {
      const auto pai = parse_pai(pd.filename().string());
      if (!pai) {
        offenders.push_back((sd.filename() / pd.filename()).generic_string());
        continue;
      }
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(pd)) {
        if (!e.is_regular_file()) continue;
        if (is_image_file(e.path())) {
          files.push_back(e.path());
        } else if (e.path().filename().string().rfind('.', 0) != 0) {
          log << "warning: skipping non-image file " << e.path().string() << '\n';
        }
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        const std::string stem = f.stem().string();
        if (stem.find(',') != std::string::npos || f.string().find(',') != std::string::npos) {
          throw Error(ErrorKind::invalid_input, "file name contains a comma: " + f.string());
        }
        const std::string id =
            std::string(to_string(*split)) + "_" + std::string(to_string(*pai)) + "_" + stem;
        if (!seen.insert(id).second) throw Error(ErrorKind::duplicate_id, "duplicate sample id " + id);
        records.push_back({id, fs::absolute(f).lexically_normal(), *pai, o.sensor, *split});
      }
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& s : offenders) list += "\n  " + s;
    throw Error(ErrorKind::unknown_class, "unrecognized directories under " + o.dir.string() + ":" + list);
  }
  if (records.empty()) {
    log << "warning: empty manifest, no images found under " << o.dir.string() << '\n';
    return kExitInput;
  }
  prepare_out(o);
  save_manifest(o.out / "manifest.csv", records);

  std::map<std::pair<Split, PaiClass>, std::size_t> counts;
  for (const auto& r : records) ++counts[{r.split, r.pai}];
  for (const auto& [key, n] : counts) {
    log << to_string(key.first) << '/' << to_string(key.second) << ": " << n << '\n';
  }
  Stamp s{"ingest", {{"dir", o.dir.string()}, {"sensor", o.sensor}}, ordered_json::object(), {}, &records};
  write_stamp(o, s);
  return kExitOk;
}

// ---- synth ----

int cmd_synth(const SynthOptions& o, std::ostream& log) {
  prepare_out(o);
  const auto records = synthesize(o.out, o.config);
  log << "wrote " << records.size() << " images to " << o.out.string() << '\n';
  Stamp s{"synth",
          {{"train_per_class", o.config.train_per_class},
           {"val_per_class", o.config.val_per_class},
           {"test_per_class", o.config.test_per_class},
           {"size", o.config.size}},
          {{"seed", o.config.seed}},
          {},
          nullptr};
  write_stamp(o, s);
  return kExitOk;
}

// ---- preprocess ----

int cmd_preprocess(const PreprocessOptions& o, std::ostream& log) {
  if (o.input_size < 1) throw Error(ErrorKind::configuration, "input size must be positive");
  const auto records = load_manifest(o.manifest);
  prepare_out(o);
  std::vector<SampleRecord> written;
  for (const auto& r : records) {
    std::string name = r.id;
    std::replace(name.begin(), name.end(), '/', '_');
    const auto dir = o.out / std::string(to_string(r.split)) / std::string(to_string(r.pai));
    fs::create_directories(dir);
    const auto path = dir / (name + ".png");
    write_png(path, preprocess(read_gray_image(r.path), o.input_size, o.clahe));
    auto copy = r;
    copy.path = path;
    written.push_back(std::move(copy));
  }
  save_manifest(o.out / "manifest.csv", written);
  log << "preprocessed " << written.size() << " images\n";
  Stamp s{"preprocess", {{"input_size", o.input_size}, {"clahe", clahe_json(o.clahe)}}, ordered_json::object(),
          {o.manifest}, &records};
  write_stamp(o, s);
  return kExitOk;
}

// ---- augment ----

int cmd_augment(const AugmentOptions& o, std::ostream& log) {
  if (o.copies < 1) throw Error(ErrorKind::configuration, "copies must be at least 1");
  if (!fs::is_directory(o.in_dir)) throw Error(ErrorKind::io, "not a directory: " + o.in_dir.string());
  augment::AugmentConfig config;
  if (o.config) config = augment::parse_config(read_text(*o.config));
  if (o.seed) config.seed = *o.seed;
  augment::validate(config);

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(o.in_dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  prepare_out(o);
  if (fs::equivalent(o.in_dir, o.out)) throw Error(ErrorKind::configuration, "output must differ from input");

  std::string plans = "output\tplan\n";
  std::uint64_t index = 0;
  for (const auto& f : files) {
    const auto rel = f.lexically_relative(o.in_dir);
    const auto image = read_gray_image(f);
    for (int k = 0; k < o.copies; ++k, ++index) {
      const auto plan = augment::sample_plan(config, index);
      std::string name = rel.stem().string();
      if (o.copies > 1) name += "_aug" + std::to_string(k);
      const auto target = o.out / rel.parent_path() / (name + ".png");
      fs::create_directories(target.parent_path());
      write_png(target, augment::apply(image, plan));
      std::string steps = augment::describe(plan);
      while (!steps.empty() && steps.back() == '\n') steps.pop_back();
      for (std::size_t p = 0; (p = steps.find('\n', p)) != std::string::npos;) steps.replace(p, 1, "; ");
      plans += target.lexically_relative(o.out).generic_string() + '\t' + steps + '\n';
    }
  }
  write_text(o.out / "plans.tsv", plans);
  write_text(o.out / "augment.conf", augment::format_config(config));
  log << "augmented " << files.size() << " images, " << index << " outputs\n";

  Stamp s{"augment", {{"in_dir", o.in_dir.string()}, {"copies", o.copies}, {"augment", augment::format_config(config)}},
          {{"seed", config.seed}}, {}, nullptr};
  for (const auto& f : files) s.inputs.push_back(f);
  write_stamp(o, s);
  return kExitOk;
}

// ---- train ----

int cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto records = load_manifest(o.manifest);
  ClassGrouping grouping = make_grouping(o.protocol);
  std::vector<SampleRecord> train_records, val_records, test_records;
  if (o.hold_out) {
    auto loo = leave_one_out_splits(records, *o.hold_out);
    train_records = std::move(loo.train);
    val_records = std::move(loo.val);
    grouping = compact_grouping(grouping, count_labels(train_records, grouping));
    val_records = mapped_only(val_records, grouping, o.hold_out);
  } else {
    train_records = filter_split(records, Split::Train);
    val_records = filter_split(records, Split::Val);
  }
  test_records = mapped_only(filter_split(records, Split::Test), grouping, o.hold_out);
  if (train_records.empty()) throw Error(ErrorKind::empty_class, "no training samples");
  if (val_records.empty()) throw Error(ErrorKind::empty_class, "no validation samples");

  const auto counts = count_labels(train_records, grouping);
  for (const auto& [label, n] : counts) {
    if (n == 0) {
      throw Error(ErrorKind::empty_class,
                  "no training samples for label " + grouping.label_names[static_cast<std::size_t>(label)]);
    }
  }
  const auto weight_fractions = class_weight_fractions(counts);
  const auto weight_map = class_weights(counts);
  std::vector<double> weights;
  for (const auto& [label, w] : weight_map) weights.push_back(w);

  NetConfig net = o.net;
  net.n_classes = grouping.n_classes;
  validate(net);
  TrainConfig tc = o.train;
  tc.class_weights = o.class_weighting ? weights : std::vector<double>{};
  std::string augment_text;
  if (o.augment_config) {
    tc.augmentation = augment::parse_config(read_text(*o.augment_config));
    augment::validate(*tc.augmentation);
    augment_text = augment::format_config(*tc.augmentation);
  }
  validate(tc);
  prepare_out(o);

  log << "loading " << train_records.size() << " training and " << val_records.size()
      << " validation images\n";
  const auto train_set = load_labeled(train_records, grouping, net.input_size, o.clahe);
  const auto val_set = load_labeled(val_records, grouping, net.input_size, o.clahe);
  log << "training " << grouping.name << " model, " << parameter_count(net) << " parameters\n";
  const auto result = train(net, tc, train_set, val_set, [&](const EpochRecord& e) {
    log << "epoch " << e.epoch << ": train_loss " << e.train_loss << " val_loss " << e.val_loss
        << " train_acc " << e.train_acc << " val_acc " << e.val_acc << '\n';
  });

  std::string used = "id,role,pai\n";
  for (const auto* set : {&train_records, &val_records}) {
    for (const auto& r : *set) {
      used += r.id + (set == &train_records ? ",train," : ",val,") + std::string(to_string(r.pai)) + '\n';
    }
  }
  write_text(o.out / "samples.csv", used);

  const Model model{net, grouping, o.clahe, result.params};
  save_model(o.out / "model.bin", model);
  {
    std::ofstream h(o.out / "history.csv", std::ios::binary);
    if (!h) throw Error(ErrorKind::io, "cannot write history.csv");
    write_history_csv(h, result.history);
  }

  const std::vector<double> eval_weights(static_cast<std::size_t>(grouping.n_classes), 1.0);
  ordered_json summary;
  summary["protocol"] = std::string(to_string(o.protocol));
  summary["grouping"] = grouping_json(grouping);
  summary["hold_out"] = o.hold_out ? ordered_json(std::string(to_string(*o.hold_out))) : ordered_json();
  summary["train_counts"] = ordered_json::array();
  summary["class_weights"] = ordered_json::array();
  for (const auto& [label, n] : counts) {
    summary["train_counts"].push_back(n);
    const auto& f = weight_fractions.at(label);
    summary["class_weights"].push_back(
        {{"value", weight_map.at(label)}, {"exact", f.str()}, {"applied", o.class_weighting}});
  }
  summary["parameter_count"] = parameter_count(net);
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["stopped_early"] = result.stopped_early;
  const auto& best = result.history.at(static_cast<std::size_t>(result.best_epoch - 1));
  summary["val"] = {{"n", val_set.images.size()}, {"loss", best.val_loss}, {"accuracy", best.val_acc}};
  if (!test_records.empty()) {
    const auto test_set = load_labeled(test_records, grouping, net.input_size, o.clahe);
    const auto e = evaluate(net, result.params, test_set, eval_weights);
    summary["test"] = {{"n", test_set.images.size()},
                       {"loss", e.loss},
                       {"accuracy", e.accuracy},
                       {"confusion", metrics::confusion_matrix(test_set.labels, e.predicted, grouping.n_classes)}};
    log << "test accuracy " << e.accuracy << " on " << test_set.images.size() << " images\n";
  }
  write_text(o.out / "summary.json", summary.dump(2) + "\n");

  ordered_json config;
  config["manifest"] = o.manifest.string();
  config["protocol"] = std::string(to_string(o.protocol));
  config["hold_out"] = summary["hold_out"];
  config["net"] = {{"input_size", net.input_size},
                   {"alpha", net.alpha},
                   {"n_classes", net.n_classes},
                   {"pooling", std::string(to_string(net.pooling))}};
  config["train"] = {{"optimizer", std::string(to_string(tc.optimizer))},
                     {"learning_rate", tc.learning_rate},
                     {"max_epochs", tc.max_epochs},
                     {"patience", tc.patience},
                     {"batch_size", tc.batch_size},
                     {"momentum", tc.momentum},
                     {"beta1", tc.beta1},
                     {"beta2", tc.beta2},
                     {"epsilon", tc.epsilon},
                     {"class_weighting", o.class_weighting}};
  config["clahe"] = clahe_json(o.clahe);
  config["augment"] = o.augment_config ? ordered_json(augment_text) : ordered_json();
  Stamp s{"train", config, {{"seed", tc.seed}}, {o.manifest}, &records};
  if (tc.augmentation) s.seeds["augment_seed"] = tc.augmentation->seed;
  if (o.augment_config) s.inputs.push_back(*o.augment_config);
  write_stamp(o, s);
  return kExitOk;
}

// ---- score / evaluate ----

namespace {

struct ScoreRun {
  ScoreTable table;
  std::size_t failed = 0;
  std::size_t total = 0;
};

ScoreRun score_records(const ScoreOptions& o, const std::string& command, std::ostream& log) {
  const auto records = load_manifest(o.manifest, ManifestOptions{false});
  const auto m1 = load_model(o.stage1);
  const auto m2 = load_model(o.stage2);
  CascadeConfig cascade;
  cascade.stage1 = std::make_shared<ModelScorer>(m1);
  cascade.stage2 = std::make_shared<ModelScorer>(m2);
  cascade.tau1 = o.tau1;
  cascade.fusion = o.fusion;
  validate(cascade);

  std::vector<SampleRecord> selected;
  if (o.hold_out) {
    selected = leave_one_out_splits(records, *o.hold_out).unknown_test;
  } else {
    selected = o.split ? filter_split(records, *o.split) : records;
  }
  if (selected.empty()) throw Error(ErrorKind::empty_class, "no samples selected for scoring");

  prepare_out(o);
  log << "scoring " << selected.size() << " images\n";
  const auto entries = decide_batch(cascade, selected);
  const auto& g2 = m2.grouping;
  ScoreRun run;
  run.total = entries.size();
  run.table.label_names = g2.label_names;
  std::string failures = "id,path,error\n";
  for (const auto& e : entries) {
    if (!e.decision) {
      ++run.failed;
      std::string msg = e.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures += e.record.id + ',' + e.record.path.string() + ',' + msg + '\n';
      continue;
    }
    const auto label = g2.label_of(e.record.pai);
    run.table.rows.push_back({e.record.id, label ? *label : -1, e.record.pai, e.decision->stage1_score,
                              e.decision->stage2_probs, e.decision->verdict, e.decision->species});
  }
  {
    std::ofstream out(o.out / "scores.csv", std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write scores.csv");
    write_scores_csv(out, run.table);
  }
  write_text(o.out / "failures.csv", failures);
  if (run.failed > 0) log << "warning: " << run.failed << " of " << run.total << " images could not be scored\n";

  ordered_json config;
  config["manifest"] = o.manifest.string();
  config["stage1"] = o.stage1.string();
  config["stage2"] = o.stage2.string();
  config["tau1"] = o.tau1;
  config["fusion"] = std::string(to_string(o.fusion));
  config["split"] = o.split ? std::string(to_string(*o.split)) : "all";
  config["hold_out"] = o.hold_out ? ordered_json(std::string(to_string(*o.hold_out))) : ordered_json();
  Stamp s{command, config, ordered_json::object(), {o.manifest, o.stage1, o.stage2}, &selected};
  write_stamp(o, s);
  return run;
}

void write_evaluation(const fs::path& out_dir, const ScoreTable& table, double tau1, std::size_t failed,
                      bool plots) {
  const auto report = build_report(table, tau1, failed);
  write_text(out_dir / "report.json", report.dump(2) + "\n");

  const auto s1 = stage1_samples(table);
  const auto det = metrics::det_curve(s1, metrics::DetApcer::pooled);
  std::ostringstream det_csv, kde_csv;
  write_det_csv(det_csv, det);
  write_text(out_dir / "det.csv", det_csv.str());

  std::vector<double> bf, at;
  for (const auto& s : s1) (s.is_attack ? at : bf).push_back(s.bf_score);
  const std::optional<metrics::KdeCurve> kb = metrics::kde(bf), ka = metrics::kde(at);
  write_kde_csv(kde_csv, kb, ka);
  write_text(out_dir / "kde.csv", kde_csv.str());
  if (plots) {
    write_text(out_dir / "det.svg", det_svg(det));
    write_text(out_dir / "kde.svg", kde_svg(kb, ka));
  }
}

std::size_t count_failures_file(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

void log_headline(std::ostream& log, const ScoreTable& table, double tau1, std::size_t failed) {
  const auto r = build_report(table, tau1, failed);
  log << "APCER(worst) " << r["apcer_worst"].get<double>() << "%  BPCER " << r["bpcer"].get<double>()
      << "%  ACER " << r["acer"].get<double>() << "%  EER " << r["eer"].get<double>() << "%\n";
}

}  // namespace

int cmd_score(const ScoreOptions& o, std::ostream& log) {
  const auto run = score_records(o, "score", log);
  return run.failed > failure_limit(run.total) ? kExitFailures : kExitOk;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
  if (!(o.tau1 >= 0.0 && o.tau1 <= 1.0)) throw Error(ErrorKind::configuration, "tau1 must lie in [0, 1]");
  std::ifstream in(o.scores, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + o.scores.string());
  const auto table = read_scores_csv(in);
  const std::size_t failed = count_failures_file(o.scores.parent_path() / "failures.csv");
  prepare_out(o);
  write_evaluation(o.out, table, o.tau1, failed, o.plots);
  log_headline(log, table, o.tau1, failed);
  Stamp s{"evaluate", {{"scores", o.scores.string()}, {"tau1", o.tau1}, {"plots", o.plots}},
          ordered_json::object(), {o.scores}, nullptr};
  write_stamp(o, s);
  return kExitOk;
}

int cmd_eval(const ScoreOptions& o, bool plots, std::ostream& log) {
  const auto run = score_records(o, "eval", log);
  if (run.failed > failure_limit(run.total)) {
    log << "error: " << run.failed << " of " << run.total << " images unreadable, above the 1% limit\n";
    return kExitFailures;
  }
  write_evaluation(o.out, run.table, o.tau1, run.failed, plots);
  log_headline(log, run.table, o.tau1, run.failed);
  return kExitOk;
}

// ---- command line ----

namespace {

void add_env_names(CLI::App* sub) {
  for (auto* opt : sub->get_options()) {
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string env = "IRISPAD_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    opt->envname(env);
  }
}

template <typename T, typename Parse>
T parse_enum(const std::string& text, Parse parse, const char* what) {
  const auto v = parse(text);
  if (!v) throw Error(ErrorKind::configuration, std::string("unknown ") + what + " '" + text + "'");
  return *v;
}

std::optional<PaiClass> parse_hold_out(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_enum<PaiClass>(text, parse_pai, "species");
}

std::optional<Split> parse_split_flag(const std::string& text) {
  if (text == "all") return std::nullopt;
  return parse_enum<Split>(text, parse_split, "split");
}

const std::vector<std::string> kPaiNames = {"printed", "contact", "cadaver", "display", "prosthetic"};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iris presentation attack detection toolkit", "irispad"};
  app.set_config("--run-config", "", "TOML or INI file supplying flag defaults");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::function<int()> action;

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a manifest from a <split>/<pai>/<files> tree");
  c_ingest->add_option("--dir", ingest.dir, "Dataset root")->required();
  c_ingest->add_option("--out", ingest.out, "Run directory")->required();
  c_ingest->add_option("--sensor", ingest.sensor, "Sensor name recorded for every sample");
  c_ingest->callback([&] { action = [&] { return cmd_ingest(ingest, err); }; });

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate the procedural toy dataset");
  c_synth->add_option("--out", synth.out, "Dataset directory")->required();
  c_synth->add_option("--per-class", synth.config.train_per_class, "Training images per class")
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--val-per-class", synth.config.val_per_class, "Validation images per class")
      ->check(CLI::NonNegativeNumber);
  c_synth->add_option("--test-per-class", synth.config.test_per_class, "Test images per class")
      ->check(CLI::NonNegativeNumber);
  c_synth->add_option("--seed", synth.config.seed, "Generator seed");
  c_synth->add_option("--size", synth.config.size, "Image side length")->check(CLI::Range(8, 4096));
  c_synth->callback([&] { action = [&] { return cmd_synth(synth, err); }; });

  PreprocessOptions prep;
  int prep_tiles = 8;
  auto* c_prep = app.add_subcommand("preprocess", "CLAHE and resize every manifest image");
  c_prep->add_option("--manifest", prep.manifest, "Input manifest")->required();
  c_prep->add_option("--out", prep.out, "Run directory")->required();
  c_prep->add_option("--input-size", prep.input_size, "Output side length");
  c_prep->add_option("--clahe-clip", prep.clahe.clip_limit, "CLAHE clip limit")->check(CLI::PositiveNumber);
  c_prep->add_option("--clahe-tiles", prep_tiles, "CLAHE grid size")->check(CLI::PositiveNumber);
  c_prep->callback([&] {
    prep.clahe.tiles_x = prep.clahe.tiles_y = prep_tiles;
    action = [&] { return cmd_preprocess(prep, err); };
  });

  AugmentOptions aug;
  std::string aug_config;
  std::uint64_t aug_seed = 0;
  auto* c_aug = app.add_subcommand("augment", "Write augmented copies of a directory of images");
  c_aug->add_option("--in-dir", aug.in_dir, "Input image directory")->required();
  c_aug->add_option("--out-dir,--out", aug.out, "Run directory")->required();
  c_aug->add_option("--config", aug_config, "Augmentation config file (key = value)");
  auto* aug_seed_opt = c_aug->add_option("--seed", aug_seed, "Overrides the config seed");
  c_aug->add_option("--copies", aug.copies, "Augmented copies per image")->check(CLI::PositiveNumber);
  c_aug->callback([&] {
    if (!aug_config.empty()) aug.config = aug_config;
    if (aug_seed_opt->count() > 0 || !aug_seed_opt->empty()) aug.seed = aug_seed;
    action = [&] { return cmd_augment(aug, err); };
  });

  TrainOptions tr;
  std::string tr_protocol = "four_class", tr_pool = "avg", tr_optimizer = "adam", tr_hold_out, tr_augment;
  int tr_tiles = 8;
  bool tr_no_weights = false;
  auto* c_train = app.add_subcommand("train", "Train one network of the cascade");
  c_train->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  c_train->add_option("--out", tr.out, "Run directory")->required();
  c_train->add_option("--protocol", tr_protocol, "two_class, three_class or four_class")
      ->check(CLI::IsMember({"two_class", "three_class", "four_class"}));
  c_train->add_option("--alpha", tr.net.alpha, "Width multiplier")->check(CLI::PositiveNumber);
  c_train->add_option("--input-size", tr.net.input_size, "Network input side length");
  c_train->add_option("--pool", tr_pool, "Global pooling")->check(CLI::IsMember({"max", "avg"}));
  c_train->add_option("--optimizer", tr_optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
  c_train->add_option("--lr", tr.train.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  c_train->add_option("--seed", tr.train.seed, "Training seed");
  c_train->add_option("--epochs", tr.train.max_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  c_train->add_option("--patience", tr.train.patience, "Early-stopping patience")->check(CLI::PositiveNumber);
  c_train->add_option("--batch-size", tr.train.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  c_train->add_option("--hold-out", tr_hold_out, "Species left out of training")->check(CLI::IsMember(kPaiNames));
  c_train->add_option("--augment-config", tr_augment, "Augmentation config file");
  c_train->add_flag("--no-class-weights", tr_no_weights, "Train with unit class weights");
  c_train->add_option("--clahe-clip", tr.clahe.clip_limit, "CLAHE clip limit")->check(CLI::PositiveNumber);
  c_train->add_option("--clahe-tiles", tr_tiles, "CLAHE grid size")->check(CLI::PositiveNumber);
  c_train->callback([&] {
    tr.protocol = parse_enum<Protocol>(tr_protocol, parse_protocol, "protocol");
    tr.net.pooling = parse_enum<Pooling>(tr_pool, parse_pooling, "pooling");
    tr.train.optimizer = parse_enum<Optimizer>(tr_optimizer, parse_optimizer, "optimizer");
    tr.hold_out = parse_hold_out(tr_hold_out);
    if (!tr_augment.empty()) tr.augment_config = tr_augment;
    tr.class_weighting = !tr_no_weights;
    tr.clahe.tiles_x = tr.clahe.tiles_y = tr_tiles;
    action = [&] { return cmd_train(tr, err); };
  });

  ScoreOptions sc;
  std::string sc_fusion = "and", sc_split = "test", sc_hold_out;
  bool no_plots = false;
  auto add_score_flags = [&](CLI::App* c) {
    c->add_option("--manifest", sc.manifest, "Dataset manifest")->required();
    c->add_option("--stage1", sc.stage1, "Two-class model")->required();
    c->add_option("--stage2", sc.stage2, "Species model")->required();
    c->add_option("--out", sc.out, "Run directory")->required();
    c->add_option("--tau1", sc.tau1, "Stage-1 bona fide threshold")->check(CLI::Range(0.0, 1.0));
    c->add_option("--fusion", sc_fusion, "and, or or stage1_only")
        ->check(CLI::IsMember({"and", "or", "stage1_only"}));
    c->add_option("--split", sc_split, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    c->add_option("--hold-out", sc_hold_out, "Score the unknown-species set for this species")
        ->check(CLI::IsMember(kPaiNames));
  };
  auto finish_score = [&] {
    sc.fusion = parse_enum<Fusion>(sc_fusion, parse_fusion, "fusion");
    sc.split = parse_split_flag(sc_split);
    sc.hold_out = parse_hold_out(sc_hold_out);
  };
  auto* c_score = app.add_subcommand("score", "Run the cascade and write the scores CSV");
  add_score_flags(c_score);
  c_score->callback([&] {
    finish_score();
    action = [&] { return cmd_score(sc, err); };
  });
  auto* c_eval = app.add_subcommand("eval", "Score and evaluate in one run");
  add_score_flags(c_eval);
  c_eval->add_flag("--no-plots", no_plots, "Skip the SVG plots");
  c_eval->callback([&] {
    finish_score();
    action = [&] { return cmd_eval(sc, !no_plots, err); };
  });

  EvaluateOptions ev;
  auto* c_evaluate = app.add_subcommand("evaluate", "Metrics, DET, KDE and plots from a scores CSV");
  c_evaluate->add_option("--scores", ev.scores, "scores.csv from score or eval")->required();
  c_evaluate->add_option("--out", ev.out, "Run directory")->required();
  c_evaluate->add_option("--tau1", ev.tau1, "Stage-1 threshold for the stage-1 block")->check(CLI::Range(0.0, 1.0));
  c_evaluate->add_flag("--no-plots", no_plots, "Skip the SVG plots");
  c_evaluate->callback([&] {
    ev.plots = !no_plots;
    action = [&] { return cmd_evaluate(ev, err); };
  });

  for (auto* sub : app.get_subcommands({})) add_env_names(sub);

  std::vector<std::string> argv_store;
  argv_store.push_back("irispad");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }

  for (auto* o : std::initializer_list<RunOptions*>{&ingest, &synth, &prep, &aug, &tr, &sc, &ev}) {
    o->command_line = args;
  }
  try {
    return action ? action() : kExitInput;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace irispad::cli
