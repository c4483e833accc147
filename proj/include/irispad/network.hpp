#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irispad/imaging.hpp"
#include "irispad/tensor.hpp"

namespace irispad {

enum class Pooling { global_max, global_avg };
std::string_view to_string(Pooling pooling);
// Accepts "max", "avg", "global_max" and "global_avg".
std::optional<Pooling> parse_pooling(std::string_view text);

// Inverted-residual block: 1x1 expansion, 3x3 depthwise with `stride`,
// linear 1x1 projection to `channels`.
struct BlockSpec {
  int channels = 16;
  int stride = 1;
  int expansion = 2;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct ChannelPlan {
  int stem = 8;  // 3x3 stride-2 convolution
  std::vector<BlockSpec> blocks;

  friend bool operator==(const ChannelPlan&, const ChannelPlan&) = default;
};

// stem 8, then (16, s2), (24, s2), (32, s1), (48, s2), all with expansion 2
ChannelPlan default_channel_plan();

// Multiple of 8 nearest to alpha * base, at least 8 and never below 90% of
// alpha * base.
int scaled_channels(int base, double alpha);
ChannelPlan scale_plan(const ChannelPlan& base, double alpha);

struct NetConfig {
  int input_size = 224;
  double alpha = 1.0;
  int n_classes = 2;
  Pooling pooling = Pooling::global_avg;
  ChannelPlan base_channels = default_channel_plan();

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Throws Error(configuration).
void validate(const NetConfig& config);

struct Param {
  std::string name;
  Tensor value;

  friend bool operator==(const Param&, const Param&) = default;
};
using ParamSet = std::vector<Param>;

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t fan_in = 0;  // zero for biases
};

// Parameters in forward order:
//   stem.weight (c, 3, 3), stem.bias
//   blockK.expand.weight (e, in), blockK.depthwise.weight (e, 3, 3),
//   blockK.project.weight (out, e), each with a bias
//   head.weight (classes, features), head.bias
std::vector<ParamSpec> param_layout(const NetConfig& config);
std::size_t parameter_count(const NetConfig& config);

ParamSet zero_params(const NetConfig& config);
// Weights uniform in +-sqrt(6 / fan_in), biases zero.
ParamSet init_params(const NetConfig& config, std::uint64_t seed);

// Throws Error(shape) naming the first offending layer.
void check_params(const NetConfig& config, const ParamSet& params);

// Images must be input_size square; pixels are scaled to [0, 1]. Result has
// shape (n, input_size, input_size, 1).
Tensor images_to_batch(std::span<const GrayImage> images, int input_size);

// Global pooling of one feature plane.
double pool_plane(std::span<const double> plane, Pooling pooling);

// Row-wise softmax of an (n, k) tensor.
Tensor softmax_rows(const Tensor& logits);

// Class probabilities, shape (n, n_classes).
Tensor forward(const NetConfig& config, const ParamSet& params, const Tensor& batch);

// Piece of every piecewise-linear unit for each sample: 0, 1 or 2 for ReLU6
// below, inside and above its linear range, and the argmax position of each
// max-pooled plane. Two parameter points with equal patterns lie on the same
// smooth piece of the loss, which is what a finite-difference check needs.
std::vector<std::uint32_t> activation_pattern(const NetConfig& config, const ParamSet& params,
                                              const Tensor& batch);

inline constexpr double kProbabilityFloor = 1e-12;

// Mean over the batch of weights[label] * -log(max(p[label], floor)).
double loss(const Tensor& probs, std::span<const int> labels, std::span<const double> weights);

struct Gradients {
  double loss = 0.0;
  Tensor probs;
  ParamSet grads;  // same layout as the parameters
};

Gradients backward(const NetConfig& config, const ParamSet& params, const Tensor& batch,
                   std::span<const int> labels, std::span<const double> weights);

}  // namespace irispad
