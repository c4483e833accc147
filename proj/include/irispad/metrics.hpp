#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "irispad/dataset.hpp"
#include "irispad/fraction.hpp"

namespace irispad::metrics {

// One scored presentation. A sample counts as classified bona fide when
// bf_score >= tau, and as an attack otherwise.
struct ScoredSample {
  std::string id;
  bool is_attack = false;
  std::optional<PaiClass> pai;  // present iff is_attack
  double bf_score = 0.0;        // in [0, 1]
};

// Throws Error(invalid_input) on a broken invariant.
void validate(const ScoredSample& sample);

// Proportion of attack presentations accepted as bona fide. Input must be
// non-empty attacks of a single species.
Fraction apcer_rate(std::span<const ScoredSample> attacks, double tau);
double apcer(std::span<const ScoredSample> attacks, double tau);

// APCER over every attack regardless of species.
Fraction apcer_pooled_rate(std::span<const ScoredSample> samples, double tau);

// Highest per-species APCER; ties go to the lowest class index. Bona fide
// samples in the input are ignored.
std::pair<PaiClass, Fraction> apcer_worst_rate(std::span<const ScoredSample> samples, double tau);
std::pair<PaiClass, double> apcer_worst(std::span<const ScoredSample> samples, double tau);

// Per-species APCER for every species present.
std::map<PaiClass, Fraction> apcer_per_pai(std::span<const ScoredSample> samples, double tau);

// Proportion of bona fide presentations rejected. Attack samples in the
// input are ignored; at least one bona fide sample is required.
Fraction bpcer_rate(std::span<const ScoredSample> samples, double tau);
double bpcer(std::span<const ScoredSample> samples, double tau);

double acer(double apcer_percent, double bpcer_percent);
Fraction acer(const Fraction& apcer, const Fraction& bpcer);

// Whether a reported ACER agrees with the mean of its APCER and BPCER to
// within the reported precision.
bool acer_consistent(double apcer_percent, double bpcer_percent, double reported_acer,
                     double tolerance = 0.005);

enum class DetApcer { pooled, worst_case };

struct DetPoint {
  double threshold;
  double apcer;  // percent
  double bpcer;  // percent
};

struct DetCurve {
  std::vector<DetPoint> points;  // thresholds strictly increasing
  Fraction eer_rate;
  double eer = 0.0;  // percent
};

// Sweeps 0, every distinct score and 1. A threshold just above 1 is appended
// only when the sweep would otherwise end with APCER above BPCER.
DetCurve det_curve(std::span<const ScoredSample> samples, DetApcer mode = DetApcer::pooled);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// entry (i, j) = number of samples with truth i predicted as j
ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int n_classes);

struct KdeCurve {
  double bandwidth = 0.0;
  std::vector<double> grid;     // 512 points, uniform on [0, 1]
  std::vector<double> density;  // same length as grid
};

inline constexpr int kKdeGridPoints = 512;

// Silverman's rule of thumb clamped to [1e-3, 0.1].
double silverman_bandwidth(std::span<const double> scores);

// Gaussian KDE with reflection at 0 and 1, so the density integrates to one
// over the unit interval.
KdeCurve kde(std::span<const double> scores, std::optional<double> bandwidth = std::nullopt);

double trapezoid_integral(const KdeCurve& curve);

// Threshold-level metrics for one operating point.
struct OperatingPoint {
  double tau = 0.5;
  std::map<PaiClass, double> apcer_per_pai;
  PaiClass worst_pai = PaiClass::Printed;
  double apcer_worst = 0.0;
  double apcer_pooled = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;  // from the worst-case APCER
};

OperatingPoint evaluate_at(std::span<const ScoredSample> samples, double tau);

}  // namespace irispad::metrics
