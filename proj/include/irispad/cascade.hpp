#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irispad/dataset.hpp"
#include "irispad/imaging.hpp"
#include "irispad/metrics.hpp"
#include "irispad/model_io.hpp"

namespace irispad {

// Maps a raw image to class probabilities under its own grouping.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual const ClassGrouping& grouping() const = 0;
  virtual std::vector<double> score(const GrayImage& image) const = 0;
};

// Preprocesses to the model's input size with its CLAHE settings, then runs
// the network.
class ModelScorer : public Scorer {
 public:
  explicit ModelScorer(Model model);
  const ClassGrouping& grouping() const override { return model_.grouping; }
  std::vector<double> score(const GrayImage& image) const override;
  const Model& model() const { return model_; }

 private:
  Model model_;
};

enum class Fusion { and_, or_, stage1_only };
std::string_view to_string(Fusion fusion);
std::optional<Fusion> parse_fusion(std::string_view text);

struct CascadeConfig {
  std::shared_ptr<const Scorer> stage1;  // bona fide vs attack
  std::shared_ptr<const Scorer> stage2;  // species head with a bona fide label
  double tau1 = 0.5;
  Fusion fusion = Fusion::and_;
};

// Throws Error(configuration) for missing scorers, a stage-1 head that is
// not two-class, a stage-2 grouping without a bona fide label, or tau1
// outside [0, 1].
void validate(const CascadeConfig& config);

enum class Verdict { bona_fide, attack };
std::string_view to_string(Verdict verdict);

struct CascadeDecision {
  Verdict verdict = Verdict::attack;
  std::optional<PaiClass> species;  // set iff verdict is attack
  double stage1_score = 0.0;        // bona fide probability from stage 1
  std::vector<double> stage2_probs;
  int stage2_label = 0;  // argmax, lowest index on ties

  friend bool operator==(const CascadeDecision&, const CascadeDecision&) = default;
};

// Decision from precomputed scores. Stage 1 accepts iff p_bf >= tau1;
// stage 2 accepts iff its argmax is the bona fide label. The reported
// species is the most probable attack label of stage 2.
CascadeDecision decide_from_scores(const ClassGrouping& stage2_grouping, double tau1, Fusion fusion,
                                   double p_bf, std::span<const double> stage2_probs);

CascadeDecision decide(const CascadeConfig& config, const GrayImage& image);

struct BatchEntry {
  SampleRecord record;
  std::optional<CascadeDecision> decision;
  std::optional<metrics::ScoredSample> scored;  // stage-1 score as bf_score
  std::string error;                            // set iff decision is empty
};

// Order-preserving; an unreadable image yields an entry with `error` set
// and the run continues.
std::vector<BatchEntry> decide_batch(const CascadeConfig& config,
                                     const std::vector<SampleRecord>& records);

}  // namespace irispad
