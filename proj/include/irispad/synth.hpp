#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "irispad/dataset.hpp"
#include "irispad/imaging.hpp"

namespace irispad {

// Procedural stand-in for an iris PAD corpus, one texture family per class:
//   bonafide  smooth radial gradient with low noise, mean near 150
//   printed   halftone dot lattice, mean near 200
//   contact   concentric rings, mean near 100
//   cadaver   coarse speckle squeezed into a narrow range, mean near 60
struct SynthConfig {
  int train_per_class = 100;
  int val_per_class = 0;
  int test_per_class = 0;
  std::uint64_t seed = 0;
  int size = 64;
};

inline constexpr std::array<PaiClass, 4> kSynthClasses = {PaiClass::BonaFide, PaiClass::Printed,
                                                          PaiClass::ContactLens, PaiClass::Cadaver};

// Throws Error(invalid_input) for a class without a generator.
GrayImage synth_image(PaiClass pai, int size, std::uint64_t seed);

// Writes <out_dir>/<split>/<pai>/<id>.png and <out_dir>/manifest.csv and
// returns the records in manifest order.
std::vector<SampleRecord> synthesize(const std::filesystem::path& out_dir, const SynthConfig& config);

}  // namespace irispad
