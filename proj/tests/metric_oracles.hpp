#pragma once

// Definitional reference implementations of the PAD error rates, written as
// plain loops over the ISO/IEC 30107-3 formulas. Test-only.

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "irispad/fraction.hpp"
#include "irispad/metrics.hpp"

namespace irispad::oracle {

using metrics::ScoredSample;

// RES = 1 when the presentation is classified as an attack.
inline int res(const ScoredSample& s, double tau) { return s.bf_score < tau ? 1 : 0; }

// APCER = (1 / N_PAIS) * sum(1 - RES_i) over the attacks of one species
inline Fraction apcer(const std::vector<ScoredSample>& samples, PaiClass pai, double tau) {
  long long n = 0, sum = 0;
  for (const auto& s : samples) {
    if (!s.is_attack || *s.pai != pai) continue;
    ++n;
    sum += 1 - res(s, tau);
  }
  return Fraction(sum, n);
}

inline Fraction apcer_pooled(const std::vector<ScoredSample>& samples, double tau) {
  long long n = 0, sum = 0;
  for (const auto& s : samples) {
    if (!s.is_attack) continue;
    ++n;
    sum += 1 - res(s, tau);
  }
  return Fraction(sum, n);
}

// BPCER = sum(RES_i) / N_BF
inline Fraction bpcer(const std::vector<ScoredSample>& samples, double tau) {
  long long n = 0, sum = 0;
  for (const auto& s : samples) {
    if (s.is_attack) continue;
    ++n;
    sum += res(s, tau);
  }
  return Fraction(sum, n);
}

inline std::pair<PaiClass, Fraction> apcer_worst(const std::vector<ScoredSample>& samples, double tau) {
  std::optional<std::pair<PaiClass, Fraction>> best;
  for (auto pai : kAllPaiClasses) {
    const bool present = std::any_of(samples.begin(), samples.end(),
                                     [&](const ScoredSample& s) { return s.is_attack && *s.pai == pai; });
    if (!present) continue;
    const auto a = apcer(samples, pai, tau);
    if (!best || a > best->second) best = {pai, a};
  }
  return *best;
}

// EER by evaluating every candidate threshold and interpolating at the sign
// change of APCER - BPCER.
inline Fraction eer(const std::vector<ScoredSample>& samples) {
  std::vector<double> taus = {0.0, 1.0};
  for (const auto& s : samples) taus.push_back(s.bf_score);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  taus.push_back(std::nextafter(1.0, 2.0));

  std::vector<Fraction> a, b;
  for (double t : taus) {
    a.push_back(apcer_pooled(samples, t));
    b.push_back(bpcer(samples, t));
  }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (a[i] == b[i]) return a[i];
    if (i + 1 < taus.size() && a[i] > b[i] && a[i + 1] < b[i + 1]) {
      const Fraction d0 = a[i] - b[i];
      const Fraction d1 = a[i + 1] - b[i + 1];
      return a[i] + d0 / (d0 - d1) * (a[i + 1] - a[i]);
    }
  }
  return Fraction(-1);
}

// Random score set with both classes and a mix of attack species.
inline std::vector<ScoredSample> random_scores(std::mt19937_64& gen, std::size_t n,
                                               bool quantized = false) {
  const PaiClass species[] = {PaiClass::Printed, PaiClass::ContactLens, PaiClass::Cadaver,
                              PaiClass::ElectronicDisplay, PaiClass::Prosthetic};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ScoredSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScoredSample s;
    s.id = "s" + std::to_string(i);
    // first two samples pin both classes
    s.is_attack = i == 0 ? true : i == 1 ? false : (gen() % 2 == 0);
    if (s.is_attack) s.pai = species[gen() % 5];
    s.bf_score = quantized ? static_cast<double>(gen() % 11) / 10.0 : unit(gen);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace irispad::oracle
