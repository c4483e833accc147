#include "irispad/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "irispad/error.hpp"
#include "irispad/rng.hpp"

namespace irispad {

namespace {

std::vector<double> resolved_weights(const TrainConfig& config, int n_classes) {
  if (config.class_weights.empty()) return std::vector<double>(n_classes, 1.0);
  if (static_cast<int>(config.class_weights.size()) != n_classes) {
    throw Error(ErrorKind::configuration,
                "expected " + std::to_string(n_classes) + " class weights, got " +
                    std::to_string(config.class_weights.size()));
  }
  return config.class_weights;
}

void check_set(const LabeledImages& set, const NetConfig& net, const char* what) {
  if (set.images.empty()) {
    throw Error(ErrorKind::configuration, std::string(what) + " split is empty");
  }
  if (set.images.size() != set.labels.size()) {
    throw Error(ErrorKind::configuration, std::string(what) + " split has mismatched labels");
  }
  for (int y : set.labels) {
    if (y < 0 || y >= net.n_classes) {
      throw Error(ErrorKind::index, std::string(what) + " label " + std::to_string(y) +
                                        " outside [0, " + std::to_string(net.n_classes) + ")");
    }
  }
}

}  // namespace

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::sgd ? "sgd" : "adam";
}

std::optional<Optimizer> parse_optimizer(std::string_view text) {
  if (text == "sgd") return Optimizer::sgd;
  if (text == "adam") return Optimizer::adam;
  return std::nullopt;
}

void validate(const TrainConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::configuration, msg); };
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    fail("learning rate must be positive");
  }
  if (config.max_epochs < 1) fail("max_epochs must be at least 1");
  if (config.patience < 1) fail("patience must be at least 1");
  if (config.batch_size < 1) fail("batch size must be at least 1");
  for (double w : config.class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) fail("class weights must be positive");
  }
  if (config.momentum < 0.0 || config.momentum >= 1.0) fail("momentum must lie in [0, 1)");
  if (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) fail("adam epsilon must be positive");
  if (config.augmentation) augment::validate(*config.augmentation);
}

LabeledImages load_labeled(const std::vector<SampleRecord>& records, const ClassGrouping& grouping,
                           int input_size, const ClaheParams& clahe) {
  LabeledImages out;
  out.images.reserve(records.size());
  for (const auto& r : records) {
    const auto label = grouping.label_of(r.pai);
    if (!label) {
      throw Error(ErrorKind::unknown_class, "sample " + r.id + ": class " +
                                                std::string(to_string(r.pai)) +
                                                " has no label in grouping " + grouping.name);
    }
    out.images.push_back(preprocess(read_gray_image(r.path), input_size, clahe));
    out.labels.push_back(*label);
    out.ids.push_back(r.id);
  }
  return out;
}

OptimizerState::OptimizerState(const TrainConfig& config, const ParamSet& like) : config_(config) {
  for (const auto& p : like) {
    m_.emplace_back(p.value.size(), 0.0);
    if (config.optimizer == Optimizer::adam) v_.emplace_back(p.value.size(), 0.0);
  }
}

void OptimizerState::step(ParamSet& params, const ParamSet& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error(ErrorKind::shape, "optimizer state does not match the parameters");
  }
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == Optimizer::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].value.values();
      const auto& g = grads[i].value.values();
      auto& vel = m_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        vel[j] = config_.momentum * vel[j] + g[j];
        const double delta = lr * vel[j];
        if (delta != 0.0) p[j] -= delta;
      }
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.values();
    const auto& g = grads[i].value.values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double delta = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
      if (delta != 0.0) p[j] -= delta;
    }
  }
}

int argmax_row(const Tensor& probs, std::size_t row) {
  const std::size_t k = probs.dim(1);
  const double* p = probs.data() + row * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

Tensor predict(const NetConfig& net, const ParamSet& params, const std::vector<GrayImage>& images,
               int batch_size) {
  const std::size_t k = static_cast<std::size_t>(net.n_classes);
  Tensor out({images.size(), k});
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t end = std::min(images.size(), start + chunk);
    const auto probs = forward(net, params,
                               images_to_batch({images.data() + start, end - start}, net.input_size));
    std::copy(probs.values().begin(), probs.values().end(), out.values().begin() + start * k);
  }
  return out;
}

Evaluation evaluate(const NetConfig& net, const ParamSet& params, const LabeledImages& data,
                    std::span<const double> class_weights, int batch_size) {
  check_set(data, net, "evaluation");
  const Tensor probs = predict(net, params, data.images, batch_size);
  Evaluation e;
  e.loss = loss(probs, data.labels, class_weights);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    e.predicted.push_back(argmax_row(probs, i));
    correct += e.predicted.back() == data.labels[i] ? 1 : 0;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.images.size());
  return e;
}

TrainResult train(const NetConfig& net, const TrainConfig& config, const LabeledImages& train_set,
                  const LabeledImages& val_set, const EpochCallback& on_epoch) {
  validate(net);
  validate(config);
  check_set(train_set, net, "train");
  check_set(val_set, net, "validation");
  const auto weights = resolved_weights(config, net.n_classes);

  TrainResult result;
  ParamSet params = init_params(net, derive_seed(config.seed, 0));
  OptimizerState optimizer(config, params);
  double best_val = INFINITY;
  int since_best = 0;

  const std::size_t n = train_set.images.size();
  std::vector<std::size_t> order(n);
  std::vector<GrayImage> batch_images;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        if (config.augmentation) {
          const std::uint64_t draw = static_cast<std::uint64_t>(epoch - 1) * n + idx;
          GrayImage img = augment::apply(train_set.images[idx],
                                         augment::sample_plan(*config.augmentation, draw));
          if (img.width() != net.input_size || img.height() != net.input_size) {
            img = resize(img, net.input_size, net.input_size);
          }
          batch_images.push_back(std::move(img));
        } else {
          batch_images.push_back(train_set.images[idx]);
        }
        batch_labels.push_back(train_set.labels[idx]);
      }
      const auto g = backward(net, params, images_to_batch(batch_images, net.input_size),
                              batch_labels, weights);
      loss_sum += g.loss * static_cast<double>(end - start);
      for (std::size_t b = 0; b < end - start; ++b) {
        correct += argmax_row(g.probs, b) == batch_labels[b] ? 1 : 0;
      }
      optimizer.step(params, g.grads);
    }

    const Evaluation val = evaluate(net, params, val_set, weights, config.batch_size);
    EpochRecord record{epoch, loss_sum / static_cast<double>(n), val.loss,
                       static_cast<double>(correct) / static_cast<double>(n), val.accuracy};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (val.loss < best_val) {
      best_val = val.loss;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  if (result.params.empty()) {
    // validation loss never finite; keep the last parameters
    result.params = params;
    result.best_epoch = static_cast<int>(result.history.size());
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss,
                  r.train_acc, r.val_acc);
    out << buf;
  }
}

}  // namespace irispad
