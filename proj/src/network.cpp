#include "irispad/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "irispad/error.hpp"
#include "irispad/rng.hpp"

namespace irispad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int conv_out(int in, int stride) { return (in - 1) / stride + 1; }

struct BlockGeom {
  int cin = 0, ce = 0, cout = 0, stride = 1;
  int hin = 0, win = 0, hout = 0, wout = 0;
  bool residual = false;
};

struct Geometry {
  int input = 0;
  int c0 = 0;
  int h0 = 0, w0 = 0;  // stem output
  std::vector<BlockGeom> blocks;
  int features = 0;
  int classes = 0;
};

Geometry geometry(const NetConfig& config) {
  const ChannelPlan plan = scale_plan(config.base_channels, config.alpha);
  Geometry g;
  g.input = config.input_size;
  g.c0 = plan.stem;
  g.h0 = g.w0 = conv_out(config.input_size, 2);
  int c = g.c0, h = g.h0;
  for (const auto& spec : plan.blocks) {
    BlockGeom b;
    b.cin = c;
    b.ce = c * spec.expansion;
    b.cout = spec.channels;
    b.stride = spec.stride;
    b.hin = b.win = h;
    b.hout = b.wout = conv_out(h, spec.stride);
    b.residual = spec.stride == 1 && b.cin == b.cout;
    g.blocks.push_back(b);
    c = b.cout;
    h = b.hout;
  }
  g.features = c;
  g.classes = config.n_classes;
  return g;
}

// parameter indices
constexpr std::size_t kStemW = 0, kStemB = 1;
std::size_t block_param(std::size_t block, std::size_t k) { return 2 + 6 * block + k; }
enum { kExpandW, kExpandB, kDepthW, kDepthB, kProjW, kProjB };

double relu6(double z) { return std::min(std::max(z, 0.0), 6.0); }
double relu6_grad(double z) { return (z > 0.0 && z < 6.0) ? 1.0 : 0.0; }

// 3x3 convolution of one plane, zero padding 1.
void conv3x3_plane(const double* in, int h, int w, int stride, const double* k, double bias,
                   double* out, int ho, int wo) {
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double acc = bias;
      const int iy0 = oy * stride - 1, ix0 = ox * stride - 1;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= h) continue;
        const double* row = in + static_cast<std::ptrdiff_t>(iy) * w;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= w) continue;
          acc += k[ky * 3 + kx] * row[ix];
        }
      }
      out[oy * wo + ox] = acc;
    }
  }
}

// Accumulates kernel, bias and (optionally) input gradients for one plane.
void conv3x3_plane_backward(const double* in, int h, int w, int stride, const double* k,
                            const double* dout, int ho, int wo, double* dk, double* dbias,
                            double* din) {
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const double g = dout[oy * wo + ox];
      if (g == 0.0) continue;
      *dbias += g;
      const int iy0 = oy * stride - 1, ix0 = ox * stride - 1;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= w) continue;
          const std::size_t at = static_cast<std::size_t>(iy) * w + ix;
          dk[ky * 3 + kx] += g * in[at];
          if (din) din[at] += g * k[ky * 3 + kx];
        }
      }
    }
  }
}

// y (rows x cols) = W (rows x inner) * x (inner x cols) + b
void pointwise(const Tensor& weight, const Tensor& bias, const std::vector<double>& x, int inner,
               std::size_t cols, std::vector<double>& y) {
  const int rows = static_cast<int>(bias.size());
  y.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  MatMap out(y.data(), rows, static_cast<Eigen::Index>(cols));
  out.noalias() = ConstMatMap(weight.data(), rows, inner) *
                  ConstMatMap(x.data(), inner, static_cast<Eigen::Index>(cols));
  for (int r = 0; r < rows; ++r) out.row(r).array() += bias[r];
}

struct BlockCache {
  std::vector<double> ze, ae, zd, ad, out;
};

struct Cache {
  std::size_t n = 0;
  std::vector<double> stem_z, stem_a;
  std::vector<BlockCache> blocks;
  std::vector<double> features;             // (C, N)
  std::vector<std::size_t> argmax;          // (C, N), global_max only
  Tensor logits;                            // (N, K)
};

void check_batch(const Geometry& g, const Tensor& batch) {
  const auto& s = batch.shape();
  const std::size_t side = static_cast<std::size_t>(g.input);
  if (s.size() != 4 || s[0] == 0 || s[1] != side || s[2] != side || s[3] != 1) {
    throw Error(ErrorKind::shape, "layer input: expected shape (n, " + std::to_string(side) + ", " +
                                      std::to_string(side) + ", 1), got " + shape_string(s));
  }
}

Cache run_forward(const NetConfig& config, const Geometry& g, const ParamSet& params,
                  const Tensor& batch) {
  check_params(config, params);
  check_batch(g, batch);
  Cache c;
  const std::size_t n = batch.dim(0);
  c.n = n;

  // stem: every output channel reads the single input plane of its sample
  const std::size_t p0 = static_cast<std::size_t>(g.h0) * g.w0;
  const std::size_t in_plane = static_cast<std::size_t>(g.input) * g.input;
  c.stem_z.resize(static_cast<std::size_t>(g.c0) * n * p0);
  for (int ch = 0; ch < g.c0; ++ch) {
    for (std::size_t s = 0; s < n; ++s) {
      conv3x3_plane(batch.data() + s * in_plane, g.input, g.input, 2,
                    params[kStemW].value.data() + ch * 9, params[kStemB].value[ch],
                    c.stem_z.data() + (ch * n + s) * p0, g.h0, g.w0);
    }
  }
  c.stem_a.resize(c.stem_z.size());
  std::transform(c.stem_z.begin(), c.stem_z.end(), c.stem_a.begin(), relu6);

  const std::vector<double>* x = &c.stem_a;
  c.blocks.resize(g.blocks.size());
  for (std::size_t bi = 0; bi < g.blocks.size(); ++bi) {
    const auto& b = g.blocks[bi];
    auto& bc = c.blocks[bi];
    const std::size_t pin = static_cast<std::size_t>(b.hin) * b.win;
    const std::size_t pout = static_cast<std::size_t>(b.hout) * b.wout;

    pointwise(params[block_param(bi, kExpandW)].value, params[block_param(bi, kExpandB)].value,
              *x, b.cin, n * pin, bc.ze);
    bc.ae.resize(bc.ze.size());
    std::transform(bc.ze.begin(), bc.ze.end(), bc.ae.begin(), relu6);

    const Tensor& kd = params[block_param(bi, kDepthW)].value;
    const Tensor& bd = params[block_param(bi, kDepthB)].value;
    bc.zd.resize(static_cast<std::size_t>(b.ce) * n * pout);
    for (int ch = 0; ch < b.ce; ++ch) {
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t plane = ch * n + s;
        conv3x3_plane(bc.ae.data() + plane * pin, b.hin, b.win, b.stride, kd.data() + ch * 9,
                      bd[ch], bc.zd.data() + plane * pout, b.hout, b.wout);
      }
    }
    bc.ad.resize(bc.zd.size());
    std::transform(bc.zd.begin(), bc.zd.end(), bc.ad.begin(), relu6);

    pointwise(params[block_param(bi, kProjW)].value, params[block_param(bi, kProjB)].value, bc.ad,
              b.ce, n * pout, bc.out);
    if (b.residual) {
      for (std::size_t i = 0; i < bc.out.size(); ++i) bc.out[i] += (*x)[i];
    }
    x = &bc.out;
  }

  const std::size_t pl = g.blocks.empty() ? p0
                                          : static_cast<std::size_t>(g.blocks.back().hout) *
                                                g.blocks.back().wout;
  c.features.assign(static_cast<std::size_t>(g.features) * n, 0.0);
  if (config.pooling == Pooling::global_max) c.argmax.assign(c.features.size(), 0);
  for (std::size_t plane = 0; plane < c.features.size(); ++plane) {
    const double* v = x->data() + plane * pl;
    c.features[plane] = pool_plane({v, pl}, config.pooling);
    if (config.pooling == Pooling::global_max) {
      // first position holding the maximum receives the gradient
      c.argmax[plane] = static_cast<std::size_t>(std::max_element(v, v + pl) - v);
    }
  }

  const std::size_t head = 2 + 6 * g.blocks.size();
  c.logits = Tensor({n, static_cast<std::size_t>(g.classes)});
  MatMap logits(c.logits.data(), static_cast<Eigen::Index>(n), g.classes);
  logits.noalias() = ConstMatMap(c.features.data(), g.features, static_cast<Eigen::Index>(n)).transpose() *
                     ConstMatMap(params[head].value.data(), g.classes, g.features).transpose();
  for (int j = 0; j < g.classes; ++j) logits.col(j).array() += params[head + 1].value[j];
  return c;
}

void check_labels(std::span<const int> labels, std::size_t n, std::size_t k,
                  std::span<const double> weights) {
  if (labels.size() != n) {
    throw Error(ErrorKind::shape, "expected " + std::to_string(n) + " labels, got " +
                                      std::to_string(labels.size()));
  }
  if (weights.size() != k) {
    throw Error(ErrorKind::shape, "expected " + std::to_string(k) + " class weights, got " +
                                      std::to_string(weights.size()));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw Error(ErrorKind::index, "label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(k) + ")");
    }
  }
}

}  // namespace

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::global_max ? "global_max" : "global_avg";
}

std::optional<Pooling> parse_pooling(std::string_view text) {
  if (text == "max" || text == "global_max") return Pooling::global_max;
  if (text == "avg" || text == "global_avg") return Pooling::global_avg;
  return std::nullopt;
}

ChannelPlan default_channel_plan() {
  return {8, {{16, 2, 2}, {24, 2, 2}, {32, 1, 2}, {48, 2, 2}}};
}

int scaled_channels(int base, double alpha) {
  if (base < 1 || !(alpha > 0.0)) {
    throw Error(ErrorKind::configuration, "scaled_channels needs base >= 1 and alpha > 0");
  }
  constexpr int divisor = 8;
  const double v = alpha * base;
  int out = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
  if (out < 0.9 * v) out += divisor;
  return out;
}

ChannelPlan scale_plan(const ChannelPlan& base, double alpha) {
  ChannelPlan out = base;
  out.stem = scaled_channels(base.stem, alpha);
  for (auto& b : out.blocks) b.channels = scaled_channels(b.channels, alpha);
  return out;
}

void validate(const NetConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::configuration, msg); };
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) fail("alpha must be positive");
  if (config.input_size < 8) fail("input size must be at least 8");
  if (config.n_classes < 2) fail("at least two classes are required");
  if (config.base_channels.blocks.empty()) fail("channel plan has no blocks");
  if (config.base_channels.stem < 1) fail("stem needs at least one channel");
  for (const auto& b : config.base_channels.blocks) {
    if (b.channels < 1 || b.stride < 1 || b.stride > 2 || b.expansion < 1) {
      fail("invalid block in channel plan");
    }
  }
}

std::vector<ParamSpec> param_layout(const NetConfig& config) {
  validate(config);
  const Geometry g = geometry(config);
  using S = std::vector<std::size_t>;
  auto z = [](int v) { return static_cast<std::size_t>(v); };
  std::vector<ParamSpec> out;
  out.push_back({"stem.weight", S{z(g.c0), 3, 3}, 9});
  out.push_back({"stem.bias", S{z(g.c0)}, 0});
  for (std::size_t i = 0; i < g.blocks.size(); ++i) {
    const auto& b = g.blocks[i];
    const std::string p = "block" + std::to_string(i + 1) + ".";
    out.push_back({p + "expand.weight", S{z(b.ce), z(b.cin)}, z(b.cin)});
    out.push_back({p + "expand.bias", S{z(b.ce)}, 0});
    out.push_back({p + "depthwise.weight", S{z(b.ce), 3, 3}, 9});
    out.push_back({p + "depthwise.bias", S{z(b.ce)}, 0});
    out.push_back({p + "project.weight", S{z(b.cout), z(b.ce)}, z(b.ce)});
    out.push_back({p + "project.bias", S{z(b.cout)}, 0});
  }
  out.push_back({"head.weight", S{z(g.classes), z(g.features)}, z(g.features)});
  out.push_back({"head.bias", S{z(g.classes)}, 0});
  return out;
}

std::size_t parameter_count(const NetConfig& config) {
  std::size_t total = 0;
  for (const auto& spec : param_layout(config)) total += element_count(spec.shape);
  return total;
}

ParamSet zero_params(const NetConfig& config) {
  ParamSet out;
  for (auto& spec : param_layout(config)) out.push_back({spec.name, Tensor(spec.shape)});
  return out;
}

ParamSet init_params(const NetConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParamSet out;
  for (auto& spec : param_layout(config)) {
    Tensor t(spec.shape);
    if (spec.fan_in > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
      for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    }
    out.push_back({spec.name, std::move(t)});
  }
  return out;
}

void check_params(const NetConfig& config, const ParamSet& params) {
  const auto layout = param_layout(config);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i >= params.size()) {
      throw Error(ErrorKind::shape, "layer " + layout[i].name + ": parameter missing");
    }
    if (params[i].name != layout[i].name) {
      throw Error(ErrorKind::shape, "layer " + layout[i].name + ": found parameter '" +
                                        params[i].name + "' in its place");
    }
    if (params[i].value.shape() != layout[i].shape) {
      throw Error(ErrorKind::shape, "layer " + layout[i].name + ": expected shape " +
                                        shape_string(layout[i].shape) + ", got " +
                                        shape_string(params[i].value.shape()));
    }
  }
  if (params.size() != layout.size()) {
    throw Error(ErrorKind::shape, "layer " + params[layout.size()].name + ": unexpected parameter");
  }
}

Tensor images_to_batch(std::span<const GrayImage> images, int input_size) {
  const std::size_t side = static_cast<std::size_t>(input_size);
  Tensor out({images.size(), side, side, 1});
  std::size_t at = 0;
  for (const auto& img : images) {
    if (img.width() != input_size || img.height() != input_size) {
      throw Error(ErrorKind::shape, "layer input: image is " + std::to_string(img.width()) + "x" +
                                        std::to_string(img.height()) + ", expected " +
                                        std::to_string(input_size) + " square");
    }
    for (std::uint8_t v : img.pixels()) out[at++] = v / 255.0;
  }
  return out;
}

double pool_plane(std::span<const double> plane, Pooling pooling) {
  if (plane.empty()) throw Error(ErrorKind::shape, "pooling an empty plane");
  if (pooling == Pooling::global_max) return *std::max_element(plane.begin(), plane.end());
  double sum = 0.0;
  for (double v : plane) sum += v;
  return sum / static_cast<double>(plane.size());
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw Error(ErrorKind::shape, "softmax expects a 2-d tensor");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = logits.data() + r * k;
    double* p = out.data() + r * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += p[j] = std::exp(z[j] - m);
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
  }
  return out;
}

Tensor forward(const NetConfig& config, const ParamSet& params, const Tensor& batch) {
  validate(config);
  return softmax_rows(run_forward(config, geometry(config), params, batch).logits);
}

std::vector<std::uint32_t> activation_pattern(const NetConfig& config, const ParamSet& params,
                                              const Tensor& batch) {
  validate(config);
  const Cache c = run_forward(config, geometry(config), params, batch);
  std::vector<std::uint32_t> out;
  auto piece = [&](const std::vector<double>& z) {
    for (double v : z) out.push_back(v <= 0.0 ? 0 : v < 6.0 ? 1 : 2);
  };
  piece(c.stem_z);
  for (const auto& b : c.blocks) {
    piece(b.ze);
    piece(b.zd);
  }
  for (std::size_t i : c.argmax) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

double loss(const Tensor& probs, std::span<const int> labels, std::span<const double> weights) {
  if (probs.rank() != 2) throw Error(ErrorKind::shape, "loss expects (n, classes) probabilities");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  check_labels(labels, n, k, weights);
  if (n == 0) throw Error(ErrorKind::shape, "loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    total += weights[y] * -std::log(std::max(probs[i * k + y], kProbabilityFloor));
  }
  return total / static_cast<double>(n);
}

Gradients backward(const NetConfig& config, const ParamSet& params, const Tensor& batch,
                   std::span<const int> labels, std::span<const double> weights) {
  validate(config);
  const Geometry g = geometry(config);
  Cache c = run_forward(config, g, params, batch);
  const std::size_t n = c.n, k = static_cast<std::size_t>(g.classes);
  check_labels(labels, n, k, weights);

  Gradients out;
  out.probs = softmax_rows(c.logits);
  out.loss = loss(out.probs, labels, weights);
  out.grads = zero_params(config);
  auto grad = [&](std::size_t i) -> Tensor& { return out.grads[i].value; };

  // d loss / d logits = w[y] / n * (p - onehot), zero where the floor applies
  RowMat dlogits(static_cast<Eigen::Index>(n), g.classes);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    const double* p = out.probs.data() + i * k;
    const bool floored = p[y] < kProbabilityFloor;
    const double scale = weights[y] / static_cast<double>(n);
    for (std::size_t j = 0; j < k; ++j) {
      dlogits(i, j) = floored ? 0.0 : scale * (p[j] - (static_cast<int>(j) == y ? 1.0 : 0.0));
    }
  }

  const std::size_t head = 2 + 6 * g.blocks.size();
  ConstMatMap feats(c.features.data(), g.features, static_cast<Eigen::Index>(n));
  ConstMatMap w_head(params[head].value.data(), g.classes, g.features);
  MatMap(grad(head).data(), g.classes, g.features).noalias() = dlogits.transpose() * feats.transpose();
  for (int j = 0; j < g.classes; ++j) grad(head + 1)[j] = dlogits.col(j).sum();
  RowMat dfeats = w_head.transpose() * dlogits.transpose();  // (C, N)

  // unpool
  const std::size_t pl = g.blocks.empty() ? static_cast<std::size_t>(g.h0) * g.w0
                                          : static_cast<std::size_t>(g.blocks.back().hout) *
                                                g.blocks.back().wout;
  std::vector<double> dx(static_cast<std::size_t>(g.features) * n * pl, 0.0);
  for (std::size_t plane = 0; plane < static_cast<std::size_t>(g.features) * n; ++plane) {
    const double d = dfeats.data()[plane];
    if (config.pooling == Pooling::global_max) {
      dx[plane * pl + c.argmax[plane]] = d;
    } else {
      const double share = d / static_cast<double>(pl);
      for (std::size_t i = 0; i < pl; ++i) dx[plane * pl + i] = share;
    }
  }

  for (std::size_t bi = g.blocks.size(); bi-- > 0;) {
    const auto& b = g.blocks[bi];
    const auto& bc = c.blocks[bi];
    const std::vector<double>& x = bi == 0 ? c.stem_a : c.blocks[bi - 1].out;
    const std::size_t pin = static_cast<std::size_t>(b.hin) * b.win;
    const std::size_t pout = static_cast<std::size_t>(b.hout) * b.wout;
    const auto cols_in = static_cast<Eigen::Index>(n * pin);
    const auto cols_out = static_cast<Eigen::Index>(n * pout);

    std::vector<double> dinput(x.size(), 0.0);
    if (b.residual) dinput = dx;

    // projection
    ConstMatMap dout(dx.data(), b.cout, cols_out);
    MatMap(grad(block_param(bi, kProjW)).data(), b.cout, b.ce).noalias() =
        dout * ConstMatMap(bc.ad.data(), b.ce, cols_out).transpose();
    for (int r = 0; r < b.cout; ++r) grad(block_param(bi, kProjB))[r] = dout.row(r).sum();
    std::vector<double> dzd(bc.ad.size());
    MatMap(dzd.data(), b.ce, cols_out).noalias() =
        ConstMatMap(params[block_param(bi, kProjW)].value.data(), b.cout, b.ce).transpose() * dout;
    for (std::size_t i = 0; i < dzd.size(); ++i) dzd[i] *= relu6_grad(bc.zd[i]);

    // depthwise
    std::vector<double> dze(bc.ae.size(), 0.0);
    const Tensor& kd = params[block_param(bi, kDepthW)].value;
    for (int ch = 0; ch < b.ce; ++ch) {
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t plane = ch * n + s;
        conv3x3_plane_backward(bc.ae.data() + plane * pin, b.hin, b.win, b.stride,
                               kd.data() + ch * 9, dzd.data() + plane * pout, b.hout, b.wout,
                               grad(block_param(bi, kDepthW)).data() + ch * 9,
                               &grad(block_param(bi, kDepthB))[ch], dze.data() + plane * pin);
      }
    }
    for (std::size_t i = 0; i < dze.size(); ++i) dze[i] *= relu6_grad(bc.ze[i]);

    // expansion
    ConstMatMap dz(dze.data(), b.ce, cols_in);
    MatMap(grad(block_param(bi, kExpandW)).data(), b.ce, b.cin).noalias() =
        dz * ConstMatMap(x.data(), b.cin, cols_in).transpose();
    for (int r = 0; r < b.ce; ++r) grad(block_param(bi, kExpandB))[r] = dz.row(r).sum();
    MatMap(dinput.data(), b.cin, cols_in).noalias() +=
        ConstMatMap(params[block_param(bi, kExpandW)].value.data(), b.ce, b.cin).transpose() * dz;
    dx = std::move(dinput);
  }

  // stem
  const std::size_t p0 = static_cast<std::size_t>(g.h0) * g.w0;
  const std::size_t in_plane = static_cast<std::size_t>(g.input) * g.input;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= relu6_grad(c.stem_z[i]);
  for (int ch = 0; ch < g.c0; ++ch) {
    for (std::size_t s = 0; s < n; ++s) {
      conv3x3_plane_backward(batch.data() + s * in_plane, g.input, g.input, 2,
                             params[kStemW].value.data() + ch * 9, dx.data() + (ch * n + s) * p0,
                             g.h0, g.w0, grad(kStemW).data() + ch * 9, &grad(kStemB)[ch], nullptr);
    }
  }
  return out;
}

}  // namespace irispad
