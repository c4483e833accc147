#include "irispad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "irispad/error.hpp"

namespace irispad::metrics {

namespace {

using Int = Fraction::Int;

bool accepted(const ScoredSample& s, double tau) { return s.bf_score >= tau; }

std::vector<double> sorted_scores(std::span<const ScoredSample> samples, auto predicate) {
  std::vector<double> out;
  for (const auto& s : samples) {
    if (predicate(s)) out.push_back(s.bf_score);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// #{s >= tau} and #{s < tau} on a sorted vector
std::size_t count_at_or_above(const std::vector<double>& sorted, double tau) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), tau));
}
std::size_t count_below(const std::vector<double>& sorted, double tau) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin());
}

Fraction rate(std::size_t errors, std::size_t total) {
  return Fraction(static_cast<Int>(errors), static_cast<Int>(total));
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void validate(const ScoredSample& s) {
  if (!(s.bf_score >= 0.0 && s.bf_score <= 1.0)) {
    throw Error(ErrorKind::invalid_input, "sample '" + s.id + "' score outside [0, 1]");
  }
  if (s.is_attack != s.pai.has_value()) {
    throw Error(ErrorKind::invalid_input, "sample '" + s.id + "' must carry a species iff it is an attack");
  }
  if (s.pai && *s.pai == PaiClass::BonaFide) {
    throw Error(ErrorKind::invalid_input, "sample '" + s.id + "' is an attack labelled bona fide");
  }
}

Fraction apcer_rate(std::span<const ScoredSample> attacks, double tau) {
  if (attacks.empty()) throw Error(ErrorKind::undefined_metric, "APCER of an empty attack set");
  const auto species = attacks.front().pai;
  std::size_t errors = 0;
  for (const auto& s : attacks) {
    validate(s);
    if (!s.is_attack) throw Error(ErrorKind::invalid_input, "APCER input contains a bona fide sample");
    if (s.pai != species) throw Error(ErrorKind::invalid_input, "APCER input mixes attack species");
    if (accepted(s, tau)) ++errors;
  }
  return rate(errors, attacks.size());
}

double apcer(std::span<const ScoredSample> attacks, double tau) {
  return apcer_rate(attacks, tau).percent();
}

Fraction apcer_pooled_rate(std::span<const ScoredSample> samples, double tau) {
  std::size_t errors = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    validate(s);
    if (!s.is_attack) continue;
    ++total;
    if (accepted(s, tau)) ++errors;
  }
  if (total == 0) throw Error(ErrorKind::undefined_metric, "APCER with no attack samples");
  return rate(errors, total);
}

std::map<PaiClass, Fraction> apcer_per_pai(std::span<const ScoredSample> samples, double tau) {
  std::map<PaiClass, std::pair<std::size_t, std::size_t>> tallies;
  for (const auto& s : samples) {
    validate(s);
    if (!s.is_attack) continue;
    auto& [errors, total] = tallies[*s.pai];
    ++total;
    if (accepted(s, tau)) ++errors;
  }
  std::map<PaiClass, Fraction> out;
  for (const auto& [pai, t] : tallies) out.emplace(pai, rate(t.first, t.second));
  return out;
}

std::pair<PaiClass, Fraction> apcer_worst_rate(std::span<const ScoredSample> samples, double tau) {
  const auto per_pai = apcer_per_pai(samples, tau);
  if (per_pai.empty()) throw Error(ErrorKind::undefined_metric, "worst-case APCER with no attacks");
  // std::map iterates in class-index order, so strict > keeps the lowest index on ties
  auto best = per_pai.begin();
  for (auto it = per_pai.begin(); it != per_pai.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return *best;
}

std::pair<PaiClass, double> apcer_worst(std::span<const ScoredSample> samples, double tau) {
  const auto [pai, r] = apcer_worst_rate(samples, tau);
  return {pai, r.percent()};
}

Fraction bpcer_rate(std::span<const ScoredSample> samples, double tau) {
  std::size_t errors = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    validate(s);
    if (s.is_attack) continue;
    ++total;
    if (!accepted(s, tau)) ++errors;
  }
  if (total == 0) throw Error(ErrorKind::undefined_metric, "BPCER with no bona fide samples");
  return rate(errors, total);
}

double bpcer(std::span<const ScoredSample> samples, double tau) {
  return bpcer_rate(samples, tau).percent();
}

double acer(double apcer_percent, double bpcer_percent) { return (apcer_percent + bpcer_percent) / 2.0; }

Fraction acer(const Fraction& apcer, const Fraction& bpcer) { return (apcer + bpcer) / Fraction(2); }

bool acer_consistent(double apcer_percent, double bpcer_percent, double reported_acer,
                     double tolerance) {
  return std::fabs(acer(apcer_percent, bpcer_percent) - reported_acer) <= tolerance + 1e-9;
}

DetCurve det_curve(std::span<const ScoredSample> samples, DetApcer mode) {
  for (const auto& s : samples) validate(s);

  const auto bona = sorted_scores(samples, [](const ScoredSample& s) { return !s.is_attack; });
  const auto attacks = sorted_scores(samples, [](const ScoredSample& s) { return s.is_attack; });
  if (bona.empty() || attacks.empty()) {
    throw Error(ErrorKind::undefined_metric, "DET curve needs both bona fide and attack samples");
  }
  std::map<PaiClass, std::vector<double>> by_species;
  if (mode == DetApcer::worst_case) {
    for (const auto& s : samples) {
      if (s.is_attack) by_species[*s.pai].push_back(s.bf_score);
    }
    for (auto& [pai, v] : by_species) std::sort(v.begin(), v.end());
  }

  std::vector<double> thresholds = {0.0, 1.0};
  for (const auto& s : samples) thresholds.push_back(s.bf_score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto apcer_at = [&](double tau) {
    if (mode == DetApcer::pooled) return rate(count_at_or_above(attacks, tau), attacks.size());
    Fraction worst;
    for (const auto& [pai, v] : by_species) worst = std::max(worst, rate(count_at_or_above(v, tau), v.size()));
    return worst;
  };
  auto bpcer_at = [&](double tau) { return rate(count_below(bona, tau), bona.size()); };

  std::vector<Fraction> a;
  std::vector<Fraction> b;
  for (double tau : thresholds) {
    a.push_back(apcer_at(tau));
    b.push_back(bpcer_at(tau));
  }
  if (a.back() > b.back()) {
    const double beyond = std::nextafter(1.0, 2.0);
    thresholds.push_back(beyond);
    a.push_back(apcer_at(beyond));
    b.push_back(bpcer_at(beyond));
  }

  DetCurve curve;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    curve.points.push_back({thresholds[i], a[i].percent(), b[i].percent()});
  }

  // APCER falls and BPCER rises with tau, so a - b changes sign exactly once.
  bool found = false;
  for (std::size_t i = 0; i < thresholds.size() && !found; ++i) {
    const Fraction d = a[i] - b[i];
    if (d == Fraction(0)) {
      curve.eer_rate = a[i];
      found = true;
    } else if (i + 1 < thresholds.size()) {
      const Fraction d_next = a[i + 1] - b[i + 1];
      if (d > Fraction(0) && d_next < Fraction(0)) {
        const Fraction t = d / (d - d_next);
        curve.eer_rate = a[i] + t * (a[i + 1] - a[i]);
        found = true;
      }
    }
  }
  if (!found) throw Error(ErrorKind::undefined_metric, "DET sweep found no APCER/BPCER crossing");
  curve.eer = curve.eer_rate.percent();
  return curve;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int n_classes) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::invalid_input, "confusion matrix inputs differ in length");
  }
  if (n_classes < 1) throw Error(ErrorKind::invalid_input, "confusion matrix needs >= 1 class");
  ConfusionMatrix m(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes) {
      throw Error(ErrorKind::index, "confusion matrix label out of range at position " + std::to_string(i));
    }
    ++m[truth[i]][predicted[i]];
  }
  return m;
}

double silverman_bandwidth(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::undefined_metric, "bandwidth of an empty score set");
  const auto n = static_cast<double>(scores.size());
  double spread = 0.0;
  if (scores.size() > 1) {
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  }
  const double h = 0.9 * spread * std::pow(n, -0.2);
  return std::clamp(h, 1e-3, 0.1);
}

KdeCurve kde(std::span<const double> scores, std::optional<double> bandwidth) {
  if (scores.empty()) throw Error(ErrorKind::undefined_metric, "KDE of an empty score set");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::invalid_input, "KDE score outside [0, 1]");
  }
  KdeCurve curve;
  curve.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(scores);
  if (!(curve.bandwidth > 0.0)) throw Error(ErrorKind::invalid_input, "KDE bandwidth must be > 0");

  const double h = curve.bandwidth;
  const double norm = 1.0 / (static_cast<double>(scores.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  curve.grid.resize(kKdeGridPoints);
  curve.density.resize(kKdeGridPoints);
  for (int k = 0; k < kKdeGridPoints; ++k) {
    const double x = static_cast<double>(k) / (kKdeGridPoints - 1);
    double acc = 0.0;
    for (double s : scores) {
      for (double c : {s, -s, 2.0 - s}) {
        const double z = (x - c) / h;
        acc += std::exp(-0.5 * z * z);
      }
    }
    curve.grid[k] = x;
    curve.density[k] = acc * norm;
  }
  return curve;
}

double trapezoid_integral(const KdeCurve& curve) {
  double sum = 0.0;
  for (std::size_t i = 1; i < curve.grid.size(); ++i) {
    sum += 0.5 * (curve.density[i] + curve.density[i - 1]) * (curve.grid[i] - curve.grid[i - 1]);
  }
  return sum;
}

OperatingPoint evaluate_at(std::span<const ScoredSample> samples, double tau) {
  OperatingPoint op;
  op.tau = tau;
  for (const auto& [pai, r] : apcer_per_pai(samples, tau)) op.apcer_per_pai[pai] = r.percent();
  const auto [worst_pai, worst] = apcer_worst_rate(samples, tau);
  op.worst_pai = worst_pai;
  op.apcer_worst = worst.percent();
  op.apcer_pooled = apcer_pooled_rate(samples, tau).percent();
  const auto bp = bpcer_rate(samples, tau);
  op.bpcer = bp.percent();
  op.acer = acer(worst, bp).percent();
  return op;
}

}  // namespace irispad::metrics
