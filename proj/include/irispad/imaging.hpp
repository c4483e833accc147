#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace irispad {

// 8-bit single-channel image, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Interleaved 8-bit image with an arbitrary channel count.
class ColorImage {
 public:
  ColorImage() = default;
  ColorImage(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }

  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

struct ClaheParams {
  int tiles_x = 8;
  int tiles_y = 8;
  // Multiple of the uniform bin height (tile_pixels / 256). Values >= 256
  // disable clipping.
  double clip_limit = 2.0;

  friend bool operator==(const ClaheParams&, const ClaheParams&) = default;
};

GrayImage extract_red_channel(const ColorImage& image);

// Per-tile clip-limited equalization, bilinearly blended between the four
// nearest tile mappings. Tiles whose raw histogram holds a single intensity
// map through the identity.
GrayImage clahe(const GrayImage& image, const ClaheParams& params);

// Bilinear resampling with half-pixel centers, rounded half-up.
GrayImage resize(const GrayImage& image, int target_w, int target_h);

// clahe followed by a square resize to target x target.
GrayImage preprocess(const GrayImage& image, int target, const ClaheParams& params);

namespace detail {

// Lookup table for one tile histogram. Exposed for tests.
std::vector<std::uint8_t> clipped_equalization_lut(std::span<const std::uint32_t> histogram,
                                                   double clip_limit);

// The clipped (and redistributed) histogram that the lut above integrates.
std::vector<std::uint32_t> clip_histogram(std::span<const std::uint32_t> histogram,
                                          double clip_limit);

}  // namespace detail

// PNG (gray, gray+alpha, RGB, RGBA; 8 or 16 bit) and binary PGM (P5).
// Color inputs are reduced with extract_red_channel.
GrayImage read_gray_image(const std::filesystem::path& path);
ColorImage read_png(const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);

}  // namespace irispad
