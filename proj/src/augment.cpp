#include "irispad/augment.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "irispad/error.hpp"
#include "irispad/rng.hpp"

namespace irispad::augment {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

double sample_bilinear(const GrayImage& img, double fx, double fy) {
  fx = std::clamp(fx, 0.0, static_cast<double>(img.width() - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double wx = fx - x0;
  const double wy = fy - y0;
  const double top = (1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
  const double bottom = (1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
  return (1.0 - wy) * top + wy * bottom;
}

// Inverse warp: `source_of` maps an output pixel to its source location.
template <typename Map>
GrayImage warp(const GrayImage& img, Map source_of) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      out.at(x, y) = to_byte(sample_bilinear(img, sx, sy));
    }
  }
  return out;
}

template <typename F>
GrayImage map_pixels(const GrayImage& img, F f) {
  GrayImage out = img;
  for (auto& v : out.pixels()) v = to_byte(f(static_cast<double>(v)));
  return out;
}

GrayImage apply_step(const GrayImage& img, const Rotate& t) {
  const double theta = t.degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  return warp(img, [&](double x, double y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::pair{c * dx + s * dy + cx, -s * dx + c * dy + cy};
  });
}

GrayImage apply_step(const GrayImage& img, const Affine& t) {
  if (!(t.scale > 0.0)) return img;
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  const double tx = t.translate_x * img.width();
  const double ty = t.translate_y * img.height();
  return warp(img, [&](double x, double y) {
    return std::pair{(x - cx - tx) / t.scale + cx, (y - cy - ty) / t.scale + cy};
  });
}

GrayImage apply_step(const GrayImage& img, const Perspective& t) {
  const double w = img.width() - 1;
  const double h = img.height() - 1;
  const double dst_x[4] = {0.0, w, w, 0.0};
  const double dst_y[4] = {0.0, 0.0, h, h};

  // Homography from output corners to displaced source corners.
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = dst_x[i];
    const double y = dst_y[i];
    const double u = x + t.dx[i] * img.width();
    const double v = y + t.dy[i] * img.height();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> hcoef = a.fullPivLu().solve(b);
  if (!hcoef.allFinite()) return img;
  return warp(img, [&](double x, double y) {
    const double d = hcoef(6) * x + hcoef(7) * y + 1.0;
    return std::pair{(hcoef(0) * x + hcoef(1) * y + hcoef(2)) / d,
                     (hcoef(3) * x + hcoef(4) * y + hcoef(5)) / d};
  });
}

GrayImage apply_step(const GrayImage& img, const Contrast& t) {
  return map_pixels(img, [&](double v) { return 128.0 + t.gain * (v - 128.0); });
}

GrayImage apply_step(const GrayImage& img, const GaussianNoise& t) {
  if (!(t.sigma > 0.0)) return img;
  Rng rng(t.noise_seed);
  return map_pixels(img, [&](double v) { return v + t.sigma * rng.normal(); });
}

GrayImage apply_step(const GrayImage& img, const CoarseDropout& t) {
  GrayImage out = img;
  const auto fill = static_cast<std::uint8_t>(std::clamp(t.fill, 0, 255));
  for (const auto& r : t.rects) {
    const int x0 = std::max(0, static_cast<int>(std::lround((r.cx - r.w / 2) * img.width())));
    const int x1 = std::min(img.width(), static_cast<int>(std::lround((r.cx + r.w / 2) * img.width())));
    const int y0 = std::max(0, static_cast<int>(std::lround((r.cy - r.h / 2) * img.height())));
    const int y1 = std::min(img.height(), static_cast<int>(std::lround((r.cy + r.h / 2) * img.height())));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) out.at(x, y) = fill;
    }
  }
  return out;
}

GrayImage apply_step(const GrayImage& img, const CropPad& t) {
  const int w = img.width() + t.left + t.right;
  const int h = img.height() + t.top + t.bottom;
  if (w < 1 || h < 1) return img;
  if (t.left == 0 && t.right == 0 && t.top == 0 && t.bottom == 0) return img;
  GrayImage canvas(w, h, 0);
  for (int y = 0; y < h; ++y) {
    const int sy = y - t.top;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < w; ++x) {
      const int sx = x - t.left;
      if (sx < 0 || sx >= img.width()) continue;
      canvas.at(x, y) = img.at(sx, sy);
    }
  }
  return resize(canvas, img.width(), img.height());
}

GrayImage apply_step(const GrayImage& img, const GaussianBlur& t) {
  if (!(t.sigma > 1e-6)) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * t.sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * t.sigma * t.sigma));
    sum += kernel[k + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * img.at(std::clamp(x + k, 0, w - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
      }
      out.at(x, y) = to_byte(acc);
    }
  }
  return out;
}

GrayImage apply_step(const GrayImage& img, const EdgeEnhance&) {
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = img.at(x, y);
      const double n = img.at(x, std::max(y - 1, 0));
      const double s = img.at(x, std::min(y + 1, h - 1));
      const double e = img.at(std::min(x + 1, w - 1), y);
      const double west = img.at(std::max(x - 1, 0), y);
      out.at(x, y) = to_byte(5.0 * c - n - s - e - west);
    }
  }
  return out;
}

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi)) {
    throw Error(ErrorKind::invalid_input, std::string(name) + ": range lo > hi");
  }
}

void check_range(const IntRange& r, const char* name) {
  if (r.lo > r.hi) throw Error(ErrorKind::invalid_input, std::string(name) + ": range lo > hi");
}

// ---- config text form ----

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "augment config line " + std::to_string(line) +
                                      ": expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, int line) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorKind::parse, "augment config line " + std::to_string(line) +
                                      ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw Error(ErrorKind::parse, "augment config line " + std::to_string(line) +
                                    ": expected true/false, got '" + v + "'");
}

std::pair<std::string, std::string> split_pair(const std::string& v, int line) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorKind::parse, "augment config line " + std::to_string(line) +
                                      ": expected 'lo,hi', got '" + v + "'");
  }
  return {trim(v.substr(0, comma)), trim(v.substr(comma + 1))};
}

}  // namespace

AugmentConfig identity_config(std::uint64_t seed) {
  AugmentConfig c;
  c.seed = seed;
  c.rotation = c.affine = c.perspective = c.contrast = c.noise = false;
  c.dropout = c.crop_pad = c.blur = c.edge_enhance = false;
  return c;
}

void validate(const AugmentConfig& c) {
  check_range(c.rotation_degrees, "rotation.degrees");
  check_range(c.translate_fraction, "affine.translate");
  check_range(c.scale, "affine.scale");
  if (!(c.scale.lo > 0.0)) throw Error(ErrorKind::invalid_input, "affine.scale must be > 0");
  check_range(c.perspective_jitter, "perspective.jitter");
  if (c.perspective_jitter.lo < 0.0) {
    throw Error(ErrorKind::invalid_input, "perspective.jitter must be >= 0");
  }
  check_range(c.contrast_gain, "contrast.gain");
  check_range(c.noise_sigma, "noise.sigma");
  if (c.noise_sigma.lo < 0.0) throw Error(ErrorKind::invalid_input, "noise.sigma must be >= 0");
  check_range(c.dropout_count, "dropout.count");
  if (c.dropout_count.lo < 0) throw Error(ErrorKind::invalid_input, "dropout.count must be >= 0");
  check_range(c.dropout_area, "dropout.area");
  if (c.dropout_area.lo < 0.0 || c.dropout_area.hi > 1.0) {
    throw Error(ErrorKind::invalid_input, "dropout.area must lie in [0, 1]");
  }
  check_range(c.crop_pad_pixels, "crop_pad.pixels");
  check_range(c.blur_sigma, "blur.sigma");
  if (c.blur_sigma.lo < 0.0) throw Error(ErrorKind::invalid_input, "blur.sigma must be >= 0");
  if (!(c.edge_enhance_probability >= 0.0 && c.edge_enhance_probability <= 1.0)) {
    throw Error(ErrorKind::invalid_input, "edge_enhance.probability must lie in [0, 1]");
  }
}

AugmentConfig parse_config(std::string_view text) {
  AugmentConfig c;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::parse, "augment config line " + std::to_string(line_no) +
                                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto range = [&](Range& r) {
      const auto [lo, hi] = split_pair(value, line_no);
      r = {parse_double(lo, line_no), parse_double(hi, line_no)};
    };
    auto int_range = [&](IntRange& r) {
      const auto [lo, hi] = split_pair(value, line_no);
      r = {parse_int(lo, line_no), parse_int(hi, line_no)};
    };

    if (key == "seed") {
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(ErrorKind::parse, "augment config line " + std::to_string(line_no) +
                                          ": bad seed '" + value + "'");
      }
      c.seed = seed;
    } else if (key == "rotation.enabled") c.rotation = parse_bool(value, line_no);
    else if (key == "rotation.degrees") range(c.rotation_degrees);
    else if (key == "affine.enabled") c.affine = parse_bool(value, line_no);
    else if (key == "affine.translate") range(c.translate_fraction);
    else if (key == "affine.scale") range(c.scale);
    else if (key == "perspective.enabled") c.perspective = parse_bool(value, line_no);
    else if (key == "perspective.jitter") range(c.perspective_jitter);
    else if (key == "contrast.enabled") c.contrast = parse_bool(value, line_no);
    else if (key == "contrast.gain") range(c.contrast_gain);
    else if (key == "noise.enabled") c.noise = parse_bool(value, line_no);
    else if (key == "noise.sigma") range(c.noise_sigma);
    else if (key == "dropout.enabled") c.dropout = parse_bool(value, line_no);
    else if (key == "dropout.count") int_range(c.dropout_count);
    else if (key == "dropout.area") range(c.dropout_area);
    else if (key == "dropout.fill") c.dropout_fill = parse_int(value, line_no);
    else if (key == "crop_pad.enabled") c.crop_pad = parse_bool(value, line_no);
    else if (key == "crop_pad.pixels") int_range(c.crop_pad_pixels);
    else if (key == "blur.enabled") c.blur = parse_bool(value, line_no);
    else if (key == "blur.sigma") range(c.blur_sigma);
    else if (key == "edge_enhance.enabled") c.edge_enhance = parse_bool(value, line_no);
    else if (key == "edge_enhance.probability") c.edge_enhance_probability = parse_double(value, line_no);
    else {
      throw Error(ErrorKind::parse, "augment config line " + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

std::string format_config(const AugmentConfig& c) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  auto r = [](const Range& v) { return fmt_double(v.lo) + "," + fmt_double(v.hi); };
  auto ir = [](const IntRange& v) { return std::to_string(v.lo) + "," + std::to_string(v.hi); };
  out << "seed = " << c.seed << "\n"
      << "rotation.enabled = " << b(c.rotation) << "\n"
      << "rotation.degrees = " << r(c.rotation_degrees) << "\n"
      << "affine.enabled = " << b(c.affine) << "\n"
      << "affine.translate = " << r(c.translate_fraction) << "\n"
      << "affine.scale = " << r(c.scale) << "\n"
      << "perspective.enabled = " << b(c.perspective) << "\n"
      << "perspective.jitter = " << r(c.perspective_jitter) << "\n"
      << "contrast.enabled = " << b(c.contrast) << "\n"
      << "contrast.gain = " << r(c.contrast_gain) << "\n"
      << "noise.enabled = " << b(c.noise) << "\n"
      << "noise.sigma = " << r(c.noise_sigma) << "\n"
      << "dropout.enabled = " << b(c.dropout) << "\n"
      << "dropout.count = " << ir(c.dropout_count) << "\n"
      << "dropout.area = " << r(c.dropout_area) << "\n"
      << "dropout.fill = " << c.dropout_fill << "\n"
      << "crop_pad.enabled = " << b(c.crop_pad) << "\n"
      << "crop_pad.pixels = " << ir(c.crop_pad_pixels) << "\n"
      << "blur.enabled = " << b(c.blur) << "\n"
      << "blur.sigma = " << r(c.blur_sigma) << "\n"
      << "edge_enhance.enabled = " << b(c.edge_enhance) << "\n"
      << "edge_enhance.probability = " << fmt_double(c.edge_enhance_probability) << "\n";
  return out.str();
}

AugmentPlan sample_plan(const AugmentConfig& c, std::uint64_t image_index) {
  validate(c);
  Rng rng(derive_seed(c.seed, image_index));
  AugmentPlan plan;
  auto draw = [&](const Range& r) { return rng.uniform(r.lo, r.hi); };

  if (c.rotation) plan.steps.emplace_back(Rotate{draw(c.rotation_degrees)});
  if (c.affine) {
    const double tx = draw(c.translate_fraction);
    const double ty = draw(c.translate_fraction);
    plan.steps.emplace_back(Affine{tx, ty, draw(c.scale)});
  }
  if (c.perspective) {
    const double jitter = draw(c.perspective_jitter);
    Perspective p{};
    for (int i = 0; i < 4; ++i) {
      p.dx[i] = rng.uniform(-jitter, jitter);
      p.dy[i] = rng.uniform(-jitter, jitter);
    }
    plan.steps.emplace_back(p);
  }
  if (c.contrast) plan.steps.emplace_back(Contrast{draw(c.contrast_gain)});
  if (c.noise) {
    const double sigma = draw(c.noise_sigma);
    plan.steps.emplace_back(GaussianNoise{sigma, rng.next()});
  }
  if (c.dropout) {
    CoarseDropout d{{}, c.dropout_fill};
    const auto n = rng.uniform_int(c.dropout_count.lo, c.dropout_count.hi);
    for (std::int64_t i = 0; i < n; ++i) {
      const double side = std::sqrt(draw(c.dropout_area));
      const double cx = rng.uniform01();
      const double cy = rng.uniform01();
      d.rects.push_back({cx, cy, side, side});
    }
    plan.steps.emplace_back(std::move(d));
  }
  if (c.crop_pad) {
    auto side = [&] {
      return static_cast<int>(rng.uniform_int(c.crop_pad_pixels.lo, c.crop_pad_pixels.hi));
    };
    const int top = side();
    const int right = side();
    const int bottom = side();
    const int left = side();
    plan.steps.emplace_back(CropPad{top, right, bottom, left});
  }
  if (c.blur) plan.steps.emplace_back(GaussianBlur{draw(c.blur_sigma)});
  if (c.edge_enhance && rng.bernoulli(c.edge_enhance_probability)) {
    plan.steps.emplace_back(EdgeEnhance{});
  }
  return plan;
}

GrayImage apply(const GrayImage& image, const AugmentPlan& plan) {
  GrayImage out = image;
  for (const auto& step : plan.steps) {
    out = std::visit([&](const auto& t) { return apply_step(out, t); }, step);
  }
  return out;
}

std::string describe(const AugmentPlan& plan) {
  std::ostringstream out;
  for (const auto& step : plan.steps) {
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, Rotate>) {
            out << "rotate " << fmt_double(t.degrees);
          } else if constexpr (std::is_same_v<T, Affine>) {
            out << "affine " << fmt_double(t.translate_x) << ' ' << fmt_double(t.translate_y)
                << ' ' << fmt_double(t.scale);
          } else if constexpr (std::is_same_v<T, Perspective>) {
            out << "perspective";
            for (int i = 0; i < 4; ++i) out << ' ' << fmt_double(t.dx[i]) << ' ' << fmt_double(t.dy[i]);
          } else if constexpr (std::is_same_v<T, Contrast>) {
            out << "contrast " << fmt_double(t.gain);
          } else if constexpr (std::is_same_v<T, GaussianNoise>) {
            out << "noise " << fmt_double(t.sigma) << ' ' << t.noise_seed;
          } else if constexpr (std::is_same_v<T, CoarseDropout>) {
            out << "dropout " << t.rects.size() << " fill " << t.fill;
            for (const auto& r : t.rects) {
              out << " [" << fmt_double(r.cx) << ' ' << fmt_double(r.cy) << ' ' << fmt_double(r.w)
                  << ' ' << fmt_double(r.h) << ']';
            }
          } else if constexpr (std::is_same_v<T, CropPad>) {
            out << "crop_pad " << t.top << ' ' << t.right << ' ' << t.bottom << ' ' << t.left;
          } else if constexpr (std::is_same_v<T, GaussianBlur>) {
            out << "blur " << fmt_double(t.sigma);
          } else {
            out << "edge_enhance";
          }
        },
        step);
    out << '\n';
  }
  return out.str();
}

}  // namespace irispad::augment
