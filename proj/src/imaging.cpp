#include "irispad/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "irispad/error.hpp"

namespace irispad {

namespace {

constexpr int kBins = 256;

std::uint8_t round_to_byte(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// Half-open span [begin, end) of tile `i` out of `count` along an axis of
// `extent` pixels; the last tile absorbs the remainder.
struct TileSpan {
  int begin;
  int end;
  double center() const { return begin + (end - begin - 1) / 2.0; }
};

TileSpan tile_span(int extent, int count, int i) {
  const int step = extent / count;
  const int begin = i * step;
  const int end = (i == count - 1) ? extent : begin + step;
  return {begin, end};
}

// For a coordinate, the lower tile index and the weight of the upper one.
struct AxisWeight {
  int lo;
  int hi;
  double w;
};

std::vector<AxisWeight> axis_weights(int extent, int count) {
  std::vector<double> centers(count);
  for (int i = 0; i < count; ++i) centers[i] = tile_span(extent, count, i).center();

  std::vector<AxisWeight> out(extent);
  int lo = 0;
  for (int p = 0; p < extent; ++p) {
    if (p <= centers.front()) {
      out[p] = {0, 0, 0.0};
      continue;
    }
    if (p >= centers.back()) {
      out[p] = {count - 1, count - 1, 0.0};
      continue;
    }
    while (lo + 1 < count && centers[lo + 1] <= p) ++lo;
    if (centers[lo] == p) {
      out[p] = {lo, lo, 0.0};
    } else {
      out[p] = {lo, lo + 1, (p - centers[lo]) / (centers[lo + 1] - centers[lo])};
    }
  }
  return out;
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::invalid_input, "image dimensions must be >= 1");
  }
  width_ = width;
  height_ = height;
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::invalid_input, "image dimensions must be >= 1");
  }
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::invalid_input, "pixel buffer does not match width x height");
  }
  width_ = width;
  height_ = height;
  data_ = std::move(data);
}

ColorImage::ColorImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1 || channels < 1) {
    throw Error(ErrorKind::invalid_input, "color image dimensions must be >= 1");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorKind::invalid_input, "pixel buffer does not match width x height x channels");
  }
}

GrayImage extract_red_channel(const ColorImage& image) {
  if (image.channels() != 3) {
    throw Error(ErrorKind::invalid_input,
                "red channel extraction needs 3 channels, got " + std::to_string(image.channels()));
  }
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) out.at(x, y) = image.at(x, y, 0);
  }
  return out;
}

namespace detail {

std::vector<std::uint32_t> clip_histogram(std::span<const std::uint32_t> histogram,
                                          double clip_limit) {
  if (histogram.size() != kBins) {
    throw Error(ErrorKind::invalid_input, "histogram must have 256 bins");
  }
  if (!(clip_limit > 0.0)) {
    throw Error(ErrorKind::invalid_input, "clip_limit must be > 0");
  }
  const std::uint64_t total = std::accumulate(histogram.begin(), histogram.end(), std::uint64_t{0});
  const double limit = clip_limit * static_cast<double>(total) / kBins;
  const std::uint64_t clip =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(std::min(limit, 1e18))));

  std::vector<std::uint32_t> out(histogram.begin(), histogram.end());
  std::uint64_t excess = 0;
  for (auto& bin : out) {
    if (bin > clip) {
      excess += bin - clip;
      bin = static_cast<std::uint32_t>(clip);
    }
  }
  const auto share = static_cast<std::uint32_t>(excess / kBins);
  const auto remainder = static_cast<int>(excess % kBins);
  for (int b = 0; b < kBins; ++b) out[b] += share + (b < remainder ? 1 : 0);
  return out;
}

std::vector<std::uint8_t> clipped_equalization_lut(std::span<const std::uint32_t> histogram,
                                                   double clip_limit) {
  const auto clipped = clip_histogram(histogram, clip_limit);
  std::vector<std::uint8_t> lut(kBins);

  const auto occupied = std::count_if(histogram.begin(), histogram.end(),
                                      [](std::uint32_t c) { return c != 0; });
  if (occupied <= 1) {
    std::iota(lut.begin(), lut.end(), std::uint8_t{0});
    return lut;
  }

  const std::uint64_t total = std::accumulate(clipped.begin(), clipped.end(), std::uint64_t{0});
  std::uint64_t cdf = 0;
  for (int b = 0; b < kBins; ++b) {
    cdf += clipped[b];
    // round(255 * cdf / total), half up, in integers
    lut[b] = static_cast<std::uint8_t>((510 * cdf + total) / (2 * total));
  }
  return lut;
}

}  // namespace detail

GrayImage clahe(const GrayImage& image, const ClaheParams& params) {
  if (params.tiles_x < 1 || params.tiles_y < 1) {
    throw Error(ErrorKind::invalid_input, "CLAHE tile grid must be at least 1x1");
  }
  if (!(params.clip_limit > 0.0)) {
    throw Error(ErrorKind::invalid_input, "CLAHE clip_limit must be > 0");
  }
  if (image.empty()) throw Error(ErrorKind::invalid_input, "CLAHE on empty image");
  if (image.width() < params.tiles_x || image.height() < params.tiles_y) {
    throw Error(ErrorKind::invalid_input,
                "image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    " is smaller than the " + std::to_string(params.tiles_x) + "x" +
                    std::to_string(params.tiles_y) + " tile grid");
  }

  const int tx = params.tiles_x;
  const int ty = params.tiles_y;
  std::vector<std::vector<std::uint8_t>> luts(static_cast<std::size_t>(tx) * ty);
  std::array<std::uint32_t, kBins> hist{};
  for (int j = 0; j < ty; ++j) {
    const auto ys = tile_span(image.height(), ty, j);
    for (int i = 0; i < tx; ++i) {
      const auto xs = tile_span(image.width(), tx, i);
      hist.fill(0);
      for (int y = ys.begin; y < ys.end; ++y) {
        for (int x = xs.begin; x < xs.end; ++x) ++hist[image.at(x, y)];
      }
      luts[static_cast<std::size_t>(j) * tx + i] =
          detail::clipped_equalization_lut(hist, params.clip_limit);
    }
  }

  const auto wx = axis_weights(image.width(), tx);
  const auto wy = axis_weights(image.height(), ty);
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    const auto& ay = wy[y];
    const int row_lo = ay.lo * tx;
    const int row_hi = ay.hi * tx;
    for (int x = 0; x < image.width(); ++x) {
      const auto& ax = wx[x];
      const std::uint8_t v = image.at(x, y);
      const double m00 = luts[row_lo + ax.lo][v];
      const double m01 = luts[row_lo + ax.hi][v];
      const double m10 = luts[row_hi + ax.lo][v];
      const double m11 = luts[row_hi + ax.hi][v];
      const double top = (1.0 - ax.w) * m00 + ax.w * m01;
      const double bottom = (1.0 - ax.w) * m10 + ax.w * m11;
      out.at(x, y) = round_to_byte((1.0 - ay.w) * top + ay.w * bottom);
    }
  }
  return out;
}

GrayImage resize(const GrayImage& image, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) {
    throw Error(ErrorKind::invalid_input, "resize target dimensions must be >= 1");
  }
  if (image.empty()) throw Error(ErrorKind::invalid_input, "resize of empty image");

  const double sx = static_cast<double>(image.width()) / target_w;
  const double sy = static_cast<double>(image.height()) / target_h;
  const double max_x = image.width() - 1;
  const double max_y = image.height() - 1;

  GrayImage out(target_w, target_h);
  for (int y = 0; y < target_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, max_y);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, max_x);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * image.at(x0, y0) + wx * image.at(x1, y0);
      const double bottom = (1.0 - wx) * image.at(x0, y1) + wx * image.at(x1, y1);
      out.at(x, y) = round_to_byte((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

GrayImage preprocess(const GrayImage& image, int target, const ClaheParams& params) {
  return resize(clahe(image, params), target, target);
}

}  // namespace irispad
