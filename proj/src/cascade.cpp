#include "irispad/cascade.hpp"

#include <algorithm>

#include "irispad/error.hpp"
#include "irispad/network.hpp"

namespace irispad {

ModelScorer::ModelScorer(Model model) : model_(std::move(model)) {
  check_params(model_.net, model_.params);
  if (model_.grouping.n_classes != model_.net.n_classes) {
    throw Error(ErrorKind::configuration, "model grouping does not match its head size");
  }
}

std::vector<double> ModelScorer::score(const GrayImage& image) const {
  const GrayImage input = preprocess(image, model_.net.input_size, model_.clahe);
  const Tensor probs = forward(model_.net, model_.params, images_to_batch({&input, 1}, model_.net.input_size));
  return probs.values();
}

std::string_view to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::and_: return "and";
    case Fusion::or_: return "or";
    case Fusion::stage1_only: return "stage1_only";
  }
  return "?";
}

std::optional<Fusion> parse_fusion(std::string_view text) {
  if (text == "and") return Fusion::and_;
  if (text == "or") return Fusion::or_;
  if (text == "stage1_only") return Fusion::stage1_only;
  return std::nullopt;
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::bona_fide ? "bona_fide" : "attack";
}

void validate(const CascadeConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::configuration, msg); };
  if (!config.stage1) fail("stage-1 scorer not loaded");
  if (!config.stage2) fail("stage-2 scorer not loaded");
  if (config.stage1->grouping().n_classes != 2) fail("stage 1 must be a two-class model");
  if (config.stage2->grouping().n_classes < 2) fail("stage 2 needs at least two classes");
  if (!config.stage2->grouping().label_of(PaiClass::BonaFide)) {
    fail("stage-2 grouping has no bona fide label");
  }
  if (!(config.tau1 >= 0.0 && config.tau1 <= 1.0)) fail("tau1 must lie in [0, 1]");
}

CascadeDecision decide_from_scores(const ClassGrouping& stage2_grouping, double tau1, Fusion fusion,
                                   double p_bf, std::span<const double> stage2_probs) {
  if (static_cast<int>(stage2_probs.size()) != stage2_grouping.n_classes) {
    throw Error(ErrorKind::shape, "stage-2 probabilities do not match its grouping");
  }
  const int bf = stage2_grouping.bona_fide_label();
  CascadeDecision d;
  d.stage1_score = p_bf;
  d.stage2_probs.assign(stage2_probs.begin(), stage2_probs.end());
  d.stage2_label = static_cast<int>(std::max_element(stage2_probs.begin(), stage2_probs.end()) -
                                    stage2_probs.begin());

  const bool stage1_accepts = p_bf >= tau1;
  const bool stage2_accepts = d.stage2_label == bf;
  bool bona = false;
  switch (fusion) {
    case Fusion::and_: bona = stage1_accepts && stage2_accepts; break;
    case Fusion::or_: bona = stage1_accepts || stage2_accepts; break;
    case Fusion::stage1_only: bona = stage1_accepts; break;
  }
  d.verdict = bona ? Verdict::bona_fide : Verdict::attack;
  if (!bona) {
    int best = -1;
    for (int j = 0; j < stage2_grouping.n_classes; ++j) {
      if (j == bf) continue;
      if (best < 0 || stage2_probs[j] > stage2_probs[best]) best = j;
    }
    d.species = stage2_grouping.representative(best);
  }
  return d;
}

CascadeDecision decide(const CascadeConfig& config, const GrayImage& image) {
  validate(config);
  const auto p1 = config.stage1->score(image);
  const double p_bf = p1.at(static_cast<std::size_t>(config.stage1->grouping().bona_fide_label()));
  const auto p2 = config.stage2->score(image);
  return decide_from_scores(config.stage2->grouping(), config.tau1, config.fusion, p_bf, p2);
}

std::vector<BatchEntry> decide_batch(const CascadeConfig& config,
                                     const std::vector<SampleRecord>& records) {
  validate(config);
  std::vector<BatchEntry> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    BatchEntry e{r, std::nullopt, std::nullopt, {}};
    try {
      e.decision = decide(config, read_gray_image(r.path));
      e.scored = metrics::ScoredSample{r.id, is_attack(r.pai),
                                       is_attack(r.pai) ? std::optional<PaiClass>(r.pai) : std::nullopt,
                                       e.decision->stage1_score};
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::io && err.kind() != ErrorKind::parse &&
          err.kind() != ErrorKind::invalid_input) {
        throw;
      }
      e.decision.reset();
      e.error = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace irispad
