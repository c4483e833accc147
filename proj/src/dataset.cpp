#include "irispad/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "irispad/error.hpp"

namespace irispad {

namespace {

constexpr std::string_view kHeader = "id,path,pai,sensor,split";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string line_prefix(int line) { return "manifest line " + std::to_string(line) + ": "; }

}  // namespace

std::string_view to_string(PaiClass pai) {
  switch (pai) {
    case PaiClass::BonaFide: return "bonafide";
    case PaiClass::Printed: return "printed";
    case PaiClass::ContactLens: return "contact";
    case PaiClass::Cadaver: return "cadaver";
    case PaiClass::ElectronicDisplay: return "display";
    case PaiClass::Prosthetic: return "prosthetic";
  }
  return "?";
}

std::optional<PaiClass> parse_pai(std::string_view text) {
  for (auto pai : kAllPaiClasses) {
    if (to_string(pai) == text) return pai;
  }
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  return std::nullopt;
}

std::vector<SampleRecord> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                         const ManifestOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, line_prefix(1) + "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw Error(ErrorKind::parse,
                line_prefix(1) + "header must be '" + std::string(kHeader) + "', got '" + line + "'");
  }

  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (fields.size() != 5) {
      throw Error(ErrorKind::parse, line_prefix(line_no) + "expected 5 fields, got " +
                                        std::to_string(fields.size()));
    }
    SampleRecord r;
    r.id = fields[0];
    if (r.id.empty()) throw Error(ErrorKind::parse, line_prefix(line_no) + "empty id");
    if (fields[1].empty()) throw Error(ErrorKind::parse, line_prefix(line_no) + "empty path");

    const auto pai = parse_pai(fields[2]);
    if (!pai) {
      throw Error(ErrorKind::unknown_class,
                  line_prefix(line_no) + "unknown class '" + fields[2] + "'");
    }
    r.pai = *pai;
    r.sensor = fields[3];
    const auto split = parse_split(fields[4]);
    if (!split) {
      throw Error(ErrorKind::parse, line_prefix(line_no) + "unknown split '" + fields[4] + "'");
    }
    r.split = *split;

    const std::filesystem::path p(fields[1]);
    r.path = (p.is_absolute() ? p : base_dir / p).lexically_normal();
    if (options.check_paths && !std::filesystem::exists(r.path)) {
      throw Error(ErrorKind::io, line_prefix(line_no) + "path not found: " + r.path.string());
    }
    if (!seen.insert(r.id).second) {
      throw Error(ErrorKind::duplicate_id, line_prefix(line_no) + "duplicate id '" + r.id + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path,
                                        const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), options);
}

void write_manifest(std::ostream& out, const std::vector<SampleRecord>& records,
                    const std::filesystem::path& base_dir) {
  out << kHeader << '\n';
  for (const auto& r : records) {
    std::filesystem::path p = r.path;
    if (!base_dir.empty()) {
      const auto rel = r.path.lexically_relative(base_dir);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out << r.id << ',' << p.generic_string() << ',' << to_string(r.pai) << ',' << r.sensor << ','
        << to_string(r.split) << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest " + path.string());
  write_manifest(out, records, path.parent_path());
}

std::vector<SampleRecord> filter_split(const std::vector<SampleRecord>& records, Split split) {
  std::vector<SampleRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const SampleRecord& r) { return r.split == split; });
  return out;
}

std::map<int, Fraction> class_weight_fractions(const LabelCounts& counts) {
  if (counts.empty()) throw Error(ErrorKind::degenerate_class, "class weights need at least one class");
  std::size_t total = 0;
  for (const auto& [label, n] : counts) {
    if (n == 0) {
      throw Error(ErrorKind::degenerate_class,
                  "class " + std::to_string(label) + " has no samples");
    }
    total += n;
  }
  const auto n_classes = static_cast<Fraction::Int>(counts.size());
  std::map<int, Fraction> weights;
  for (const auto& [label, n] : counts) {
    weights.emplace(label, Fraction(static_cast<Fraction::Int>(total),
                                    n_classes * static_cast<Fraction::Int>(n)));
  }
  return weights;
}

std::map<int, double> class_weights(const LabelCounts& counts) {
  std::map<int, double> out;
  for (const auto& [label, w] : class_weight_fractions(counts)) out.emplace(label, w.to_double());
  return out;
}

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::two_class: return "two_class";
    case Protocol::three_class: return "three_class";
    case Protocol::four_class: return "four_class";
  }
  return "?";
}

std::optional<Protocol> parse_protocol(std::string_view text) {
  if (text == "two_class") return Protocol::two_class;
  if (text == "three_class") return Protocol::three_class;
  if (text == "four_class") return Protocol::four_class;
  return std::nullopt;
}

PaiClass ClassGrouping::representative(int label) const {
  for (auto pai : kAllPaiClasses) {
    if (label_of(pai) == label) return pai;
  }
  throw Error(ErrorKind::index, "grouping '" + name + "' has no label " + std::to_string(label));
}

int ClassGrouping::bona_fide_label() const {
  const auto label = label_of(PaiClass::BonaFide);
  if (!label) throw Error(ErrorKind::configuration, "grouping '" + name + "' has no bona fide label");
  return *label;
}

ClassGrouping make_grouping(Protocol protocol) {
  using P = PaiClass;
  ClassGrouping g;
  g.name = std::string(to_string(protocol));
  auto set = [&](P pai, int label) { g.labels[static_cast<int>(pai)] = label; };
  switch (protocol) {
    case Protocol::two_class:
      g.n_classes = 2;
      g.label_names = {"bonafide", "attack"};
      set(P::BonaFide, 0);
      for (auto pai : {P::Printed, P::ContactLens, P::Cadaver, P::ElectronicDisplay, P::Prosthetic}) {
        set(pai, 1);
      }
      break;
    case Protocol::three_class:
      g.n_classes = 3;
      g.label_names = {"bonafide", "contact", "printed"};
      set(P::BonaFide, 0);
      set(P::ContactLens, 1);
      for (auto pai : {P::Printed, P::ElectronicDisplay, P::Prosthetic, P::Cadaver}) set(pai, 2);
      break;
    case Protocol::four_class:
      g.n_classes = 4;
      g.label_names = {"bonafide", "contact", "printed", "cadaver"};
      set(P::BonaFide, 0);
      set(P::ContactLens, 1);
      for (auto pai : {P::Printed, P::ElectronicDisplay, P::Prosthetic}) set(pai, 2);
      set(P::Cadaver, 3);
      break;
  }
  return g;
}

ClassGrouping compact_grouping(const ClassGrouping& grouping, const LabelCounts& counts) {
  std::vector<int> remap(grouping.n_classes, -1);
  ClassGrouping out;
  out.name = grouping.name;
  for (int label = 0; label < grouping.n_classes; ++label) {
    const auto it = counts.find(label);
    if (it == counts.end() || it->second == 0) continue;
    remap[label] = out.n_classes++;
    out.label_names.push_back(grouping.label_names[label]);
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const auto old = grouping.labels[i];
    if (old && remap[*old] >= 0) out.labels[i] = remap[*old];
  }
  return out;
}

LabelCounts count_labels(const std::vector<SampleRecord>& records, const ClassGrouping& grouping) {
  LabelCounts counts;
  for (int label = 0; label < grouping.n_classes; ++label) counts[label] = 0;
  for (const auto& r : records) {
    const auto label = grouping.label_of(r.pai);
    if (!label) {
      throw Error(ErrorKind::unknown_class, "sample '" + r.id + "' class " +
                                                std::string(to_string(r.pai)) +
                                                " is not mapped by grouping " + grouping.name);
    }
    ++counts[*label];
  }
  return counts;
}

LeaveOneOutSplit leave_one_out_splits(const std::vector<SampleRecord>& records, PaiClass held_out) {
  if (held_out == PaiClass::BonaFide) {
    throw Error(ErrorKind::invalid_input, "bona fide cannot be held out");
  }
  const bool present = std::any_of(records.begin(), records.end(),
                                   [&](const SampleRecord& r) { return r.pai == held_out; });
  if (!present) {
    throw Error(ErrorKind::empty_class,
                "held-out class " + std::string(to_string(held_out)) + " has no samples");
  }
  LeaveOneOutSplit out;
  for (const auto& r : records) {
    if (r.pai == held_out) {
      out.unknown_test.push_back(r);
      continue;
    }
    switch (r.split) {
      case Split::Train: out.train.push_back(r); break;
      case Split::Val: out.val.push_back(r); break;
      case Split::Test:
        if (r.pai == PaiClass::BonaFide) out.unknown_test.push_back(r);
        break;
    }
  }
  return out;
}

}  // namespace irispad
