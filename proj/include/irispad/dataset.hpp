#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irispad/fraction.hpp"

namespace irispad {

// Declaration order fixes the class index used for tie-breaking.
enum class PaiClass { BonaFide, Printed, ContactLens, Cadaver, ElectronicDisplay, Prosthetic };

inline constexpr std::array<PaiClass, 6> kAllPaiClasses = {
    PaiClass::BonaFide, PaiClass::Printed,           PaiClass::ContactLens,
    PaiClass::Cadaver,  PaiClass::ElectronicDisplay, PaiClass::Prosthetic};

// Manifest spelling: bonafide, printed, contact, cadaver, display, prosthetic.
std::string_view to_string(PaiClass pai);
std::optional<PaiClass> parse_pai(std::string_view text);
inline bool is_attack(PaiClass pai) { return pai != PaiClass::BonaFide; }

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct SampleRecord {
  std::string id;
  std::filesystem::path path;  // resolved against the manifest directory
  PaiClass pai = PaiClass::BonaFide;
  std::string sensor;
  Split split = Split::Train;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ManifestOptions {
  bool check_paths = true;
};

// Header must be exactly `id,path,pai,sensor,split`. Relative paths are
// resolved against `base_dir`.
std::vector<SampleRecord> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                         const ManifestOptions& options = {});
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path,
                                        const ManifestOptions& options = {});
// Paths are written relative to `base_dir` when they live beneath it.
void write_manifest(std::ostream& out, const std::vector<SampleRecord>& records,
                    const std::filesystem::path& base_dir);
void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

std::vector<SampleRecord> filter_split(const std::vector<SampleRecord>& records, Split split);

// ---- class weights ----

using LabelCounts = std::map<int, std::size_t>;

// weight_i = N / (C * n_i), exact.
std::map<int, Fraction> class_weight_fractions(const LabelCounts& counts);
std::map<int, double> class_weights(const LabelCounts& counts);

// ---- groupings ----

enum class Protocol { two_class, three_class, four_class };
std::string_view to_string(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view text);

struct ClassGrouping {
  std::string name;
  int n_classes = 0;
  // Label for each PaiClass (indexed by enum value); nullopt when unmapped.
  std::array<std::optional<int>, 6> labels{};
  std::vector<std::string> label_names;

  std::optional<int> label_of(PaiClass pai) const { return labels[static_cast<int>(pai)]; }
  // Lowest-index PaiClass that maps to `label`.
  PaiClass representative(int label) const;
  int bona_fide_label() const;

  friend bool operator==(const ClassGrouping&, const ClassGrouping&) = default;
};

ClassGrouping make_grouping(Protocol protocol);

// Drops labels with no training samples and renumbers the rest contiguously.
ClassGrouping compact_grouping(const ClassGrouping& grouping, const LabelCounts& counts);

LabelCounts count_labels(const std::vector<SampleRecord>& records, const ClassGrouping& grouping);

// ---- leave-one-out ----

struct LeaveOneOutSplit {
  std::vector<SampleRecord> train;         // train split, held-out species removed
  std::vector<SampleRecord> val;           // val split, held-out species removed
  std::vector<SampleRecord> unknown_test;  // every held-out sample + bona fide test
};

LeaveOneOutSplit leave_one_out_splits(const std::vector<SampleRecord>& records, PaiClass held_out);

}  // namespace irispad
