#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "irispad/imaging.hpp"

namespace irispad::augment {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

// Field order is the order transforms are applied in.
struct AugmentConfig {
  std::uint64_t seed = 0;

  bool rotation = true;
  Range rotation_degrees{-15.0, 15.0};

  bool affine = true;
  Range translate_fraction{-0.10, 0.10};
  Range scale{0.9, 1.1};

  bool perspective = true;
  Range perspective_jitter{0.0, 0.05};  // corner displacement, fraction of size

  bool contrast = true;
  Range contrast_gain{0.75, 1.25};

  bool noise = true;
  Range noise_sigma{0.0, 10.0};  // intensity units

  bool dropout = true;
  IntRange dropout_count{0, 4};
  Range dropout_area{0.02, 0.10};  // fraction of image area per rectangle
  int dropout_fill = 0;

  bool crop_pad = true;
  IntRange crop_pad_pixels{-8, 8};  // negative crops, positive pads

  bool blur = true;
  Range blur_sigma{0.0, 1.5};

  bool edge_enhance = true;
  double edge_enhance_probability = 0.2;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

// Config with every transform switched off.
AugmentConfig identity_config(std::uint64_t seed = 0);

// Throws Error(invalid_input) naming the first violated constraint.
void validate(const AugmentConfig& config);

// key = value text form; unknown keys and malformed values are parse errors.
AugmentConfig parse_config(std::string_view text);
std::string format_config(const AugmentConfig& config);

struct Rotate {
  double degrees;
  friend bool operator==(const Rotate&, const Rotate&) = default;
};
struct Affine {
  double translate_x;  // fraction of width
  double translate_y;  // fraction of height
  double scale;
  friend bool operator==(const Affine&, const Affine&) = default;
};
struct Perspective {
  // Source-corner displacements (fractions of size), clockwise from top-left.
  double dx[4];
  double dy[4];
  friend bool operator==(const Perspective&, const Perspective&) = default;
};
struct Contrast {
  double gain;
  friend bool operator==(const Contrast&, const Contrast&) = default;
};
struct GaussianNoise {
  double sigma;
  std::uint64_t noise_seed;
  friend bool operator==(const GaussianNoise&, const GaussianNoise&) = default;
};
struct DropRect {
  double cx, cy;  // center, fraction of width / height
  double w, h;    // extent, fraction of width / height
  friend bool operator==(const DropRect&, const DropRect&) = default;
};
struct CoarseDropout {
  std::vector<DropRect> rects;
  int fill;
  friend bool operator==(const CoarseDropout&, const CoarseDropout&) = default;
};
struct CropPad {
  int top, right, bottom, left;  // negative crops, positive pads
  friend bool operator==(const CropPad&, const CropPad&) = default;
};
struct GaussianBlur {
  double sigma;
  friend bool operator==(const GaussianBlur&, const GaussianBlur&) = default;
};
struct EdgeEnhance {
  friend bool operator==(const EdgeEnhance&, const EdgeEnhance&) = default;
};

using Transform = std::variant<Rotate, Affine, Perspective, Contrast, GaussianNoise,
                               CoarseDropout, CropPad, GaussianBlur, EdgeEnhance>;

struct AugmentPlan {
  std::vector<Transform> steps;
  friend bool operator==(const AugmentPlan&, const AugmentPlan&) = default;
};

AugmentPlan sample_plan(const AugmentConfig& config, std::uint64_t image_index);

GrayImage apply(const GrayImage& image, const AugmentPlan& plan);

std::string describe(const AugmentPlan& plan);

}  // namespace irispad::augment
