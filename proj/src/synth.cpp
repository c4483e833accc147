#include "irispad/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "irispad/error.hpp"
#include "irispad/rng.hpp"

namespace irispad {

namespace {

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

GrayImage radial_gradient(int size, Rng& rng) {
  const double mean = rng.uniform(142.0, 158.0);
  const double cx = size / 2.0 + rng.uniform(-4.0, 4.0);
  const double cy = size / 2.0 + rng.uniform(-4.0, 4.0);
  const double reach = 0.7 * size;
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      img.at(x, y) = to_pixel(mean + 25.0 * (0.5 - r / reach) + 3.0 * rng.normal());
    }
  }
  return img;
}

GrayImage halftone(int size, Rng& rng) {
  const double paper = rng.uniform(206.0, 222.0);
  const double ink = paper - 60.0;
  const double period = rng.uniform(5.0, 6.5);
  const double ox = rng.uniform(0.0, period), oy = rng.uniform(0.0, period);
  const double radius = 0.3 * period;
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double fx = std::fmod(x + ox, period) - period / 2.0;
      const double fy = std::fmod(y + oy, period) - period / 2.0;
      const bool dot = fx * fx + fy * fy <= radius * radius;
      img.at(x, y) = to_pixel((dot ? ink : paper) + 3.0 * rng.normal());
    }
  }
  return img;
}

GrayImage rings(int size, Rng& rng) {
  const double mean = rng.uniform(92.0, 108.0);
  const double period = rng.uniform(5.0, 8.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double cx = size / 2.0 + rng.uniform(-3.0, 3.0);
  const double cy = size / 2.0 + rng.uniform(-3.0, 3.0);
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      img.at(x, y) = to_pixel(mean + 35.0 * std::sin(2.0 * std::numbers::pi * r / period + phase) +
                              3.0 * rng.normal());
    }
  }
  return img;
}

GrayImage speckle(int size, Rng& rng) {
  const double mean = rng.uniform(52.0, 68.0);
  const int cell = 2;
  const int cells = (size + cell - 1) / cell;
  std::vector<double> grain(static_cast<std::size_t>(cells) * cells);
  for (auto& g : grain) g = std::clamp(14.0 * rng.normal(), -25.0, 25.0);
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      img.at(x, y) = to_pixel(mean + grain[static_cast<std::size_t>(y / cell) * cells + x / cell]);
    }
  }
  return img;
}

}  // namespace

GrayImage synth_image(PaiClass pai, int size, std::uint64_t seed) {
  if (size < 8) throw Error(ErrorKind::invalid_input, "synthetic images need at least 8 pixels");
  Rng rng(seed);
  switch (pai) {
    case PaiClass::BonaFide: return radial_gradient(size, rng);
    case PaiClass::Printed: return halftone(size, rng);
    case PaiClass::ContactLens: return rings(size, rng);
    case PaiClass::Cadaver: return speckle(size, rng);
    default: break;
  }
  throw Error(ErrorKind::invalid_input,
              "no synthetic generator for class " + std::string(to_string(pai)));
}

std::vector<SampleRecord> synthesize(const std::filesystem::path& out_dir, const SynthConfig& config) {
  if (config.train_per_class < 1 || config.val_per_class < 0 || config.test_per_class < 0) {
    throw Error(ErrorKind::invalid_input, "per-class counts must be at least 1 for train and 0 otherwise");
  }
  const std::pair<Split, int> splits[] = {{Split::Train, config.train_per_class},
                                          {Split::Val, config.val_per_class},
                                          {Split::Test, config.test_per_class}};
  std::vector<SampleRecord> records;
  for (const auto& [split, count] : splits) {
    for (std::size_t c = 0; c < kSynthClasses.size(); ++c) {
      const PaiClass pai = kSynthClasses[c];
      const auto dir = out_dir / std::string(to_string(split)) / std::string(to_string(pai));
      if (count > 0) std::filesystem::create_directories(dir);
      for (int i = 0; i < count; ++i) {
        const std::uint64_t stream = (static_cast<std::uint64_t>(split) << 40) |
                                     (static_cast<std::uint64_t>(c) << 32) |
                                     static_cast<std::uint64_t>(i);
        char id[64];
        std::snprintf(id, sizeof id, "%s_%s_%05d", std::string(to_string(split)).c_str(),
                      std::string(to_string(pai)).c_str(), i);
        const auto path = dir / (std::string(id) + ".png");
        write_png(path, synth_image(pai, config.size, derive_seed(config.seed, stream)));
        records.push_back({id, path, pai, "synthetic", split});
      }
    }
  }
  save_manifest(out_dir / "manifest.csv", records);
  return records;
}

}  // namespace irispad
