#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "irispad/cascade.hpp"
#include "irispad/metrics.hpp"
#include "json.hpp"

namespace irispad::cli {

struct ScoreRow {
  std::string id;
  int true_label = -1;  // stage-2 label of the true class, -1 when unmapped
  PaiClass pai = PaiClass::BonaFide;
  double stage1_bf_score = 0.0;
  std::vector<double> stage2_probs;
  Verdict verdict = Verdict::attack;
  std::optional<PaiClass> species;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct ScoreTable {
  std::vector<std::string> label_names;  // stage-2 labels
  std::vector<ScoreRow> rows;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

// id,true_label,pai,stage1_bf_score,stage2_<label>...,verdict,species
void write_scores_csv(std::ostream& out, const ScoreTable& table);
ScoreTable read_scores_csv(std::istream& in);

std::vector<metrics::ScoredSample> stage1_samples(const ScoreTable& table);
// Verdicts encoded as bf_score 1 (bona fide) or 0 (attack), read at tau 0.5.
std::vector<metrics::ScoredSample> verdict_samples(const ScoreTable& table);

// Throws Error(undefined_metric) when either class is missing.
nlohmann::ordered_json build_report(const ScoreTable& table, double tau1, std::size_t failed);

void write_det_csv(std::ostream& out, const metrics::DetCurve& curve);
// score,bona_fide,attack; a column is empty when that class has no samples.
void write_kde_csv(std::ostream& out, const std::optional<metrics::KdeCurve>& bona_fide,
                   const std::optional<metrics::KdeCurve>& attack);

std::string det_svg(const metrics::DetCurve& curve);
std::string kde_svg(const std::optional<metrics::KdeCurve>& bona_fide,
                    const std::optional<metrics::KdeCurve>& attack);

// %.17g, so doubles survive a text round trip.
std::string format_double(double v);

}  // namespace irispad::cli
