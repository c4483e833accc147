#pragma once

#include <algorithm>
#include <vector>

#include "irispad/cascade.hpp"
#include "irispad/metrics.hpp"
#include "irispad/rng.hpp"

namespace irispad::test {

struct StageRates {
  Fraction apcer;  // pooled over attacks
  Fraction bpcer;
};

// Rates of an accept/reject decision, encoded as bf_score 1 or 0 at tau 0.5.
inline StageRates rates_of(const std::vector<PaiClass>& truth, const std::vector<bool>& accepted) {
  std::vector<metrics::ScoredSample> s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s.push_back({"s" + std::to_string(i), is_attack(truth[i]),
                 is_attack(truth[i]) ? std::optional<PaiClass>(truth[i]) : std::nullopt,
                 accepted[i] ? 1.0 : 0.0});
  }
  return {metrics::apcer_pooled_rate(s, 0.5), metrics::bpcer_rate(s, 0.5)};
}

struct ScoredBatch {
  std::vector<PaiClass> truth;
  std::vector<double> p_bf;
  std::vector<std::vector<double>> stage2;
};

// Random batch with both classes present and stage-2 rows summing to one.
inline ScoredBatch random_scored_batch(Rng& rng, const ClassGrouping& grouping, std::size_t n) {
  ScoredBatch b;
  const PaiClass attacks[] = {PaiClass::Printed, PaiClass::ContactLens, PaiClass::Cadaver};
  for (std::size_t i = 0; i < n; ++i) {
    const PaiClass pai = i == 0 ? PaiClass::BonaFide
                         : i == 1 ? PaiClass::Printed
                         : rng.bernoulli(0.5) ? PaiClass::BonaFide
                                              : attacks[rng.uniform_int(0, 2)];
    b.truth.push_back(pai);
    // quantized scores make ties with tau1 and between stage-2 entries common
    b.p_bf.push_back(static_cast<double>(rng.uniform_int(0, 20)) / 20.0);
    std::vector<double> row(static_cast<std::size_t>(grouping.n_classes));
    double sum = 0.0;
    for (auto& v : row) sum += v = static_cast<double>(rng.uniform_int(0, 4));
    if (sum == 0.0) {
      row.assign(row.size(), 1.0);
      sum = static_cast<double>(row.size());
    }
    for (auto& v : row) v /= sum;
    b.stage2.push_back(std::move(row));
  }
  return b;
}

struct InclusionCheck {
  bool and_holds = true;
  bool or_holds = true;
  bool intersection_holds = true;
};

// Cascade APCER/BPCER against each stage's own rates for both fusion rules.
inline InclusionCheck check_inclusions(const ScoredBatch& b, const ClassGrouping& grouping, double tau1) {
  const std::size_t n = b.truth.size();
  const int bf = grouping.bona_fide_label();
  std::vector<bool> s1(n), s2(n), fused_and(n), fused_or(n);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i] = b.p_bf[i] >= tau1;
    const auto& row = b.stage2[i];
    s2[i] = std::max_element(row.begin(), row.end()) - row.begin() == bf;
    fused_and[i] = decide_from_scores(grouping, tau1, Fusion::and_, b.p_bf[i], row).verdict ==
                   Verdict::bona_fide;
    fused_or[i] = decide_from_scores(grouping, tau1, Fusion::or_, b.p_bf[i], row).verdict ==
                  Verdict::bona_fide;
  }
  InclusionCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    if (fused_and[i] != (s1[i] && s2[i]) || fused_or[i] != (s1[i] || s2[i])) {
      out.intersection_holds = false;
    }
  }
  const auto r1 = rates_of(b.truth, s1), r2 = rates_of(b.truth, s2);
  const auto ra = rates_of(b.truth, fused_and), ro = rates_of(b.truth, fused_or);
  out.and_holds = ra.apcer <= std::min(r1.apcer, r2.apcer) && ra.bpcer >= std::max(r1.bpcer, r2.bpcer);
  out.or_holds = ro.apcer >= std::max(r1.apcer, r2.apcer) && ro.bpcer <= std::min(r1.bpcer, r2.bpcer);
  return out;
}

}  // namespace irispad::test
