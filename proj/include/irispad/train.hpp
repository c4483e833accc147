#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "irispad/augment.hpp"
#include "irispad/dataset.hpp"
#include "irispad/imaging.hpp"
#include "irispad/network.hpp"

namespace irispad {

enum class Optimizer { sgd, adam };
std::string_view to_string(Optimizer optimizer);
std::optional<Optimizer> parse_optimizer(std::string_view text);

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-5;
  int max_epochs = 200;
  int patience = 10;  // epochs without a lower validation loss before stopping
  int batch_size = 32;
  std::vector<double> class_weights;  // indexed by label; empty means all 1
  std::uint64_t seed = 0;

  double momentum = 0.9;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Applied to the input-sized training images, fresh draw every epoch.
  std::optional<augment::AugmentConfig> augmentation;
};

// Throws Error(configuration).
void validate(const TrainConfig& config);

// Images already preprocessed to the network input size.
struct LabeledImages {
  std::vector<GrayImage> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
};

// Reads, CLAHE-equalizes and resizes every record. Records whose class has
// no label in `grouping` are an error.
LabeledImages load_labeled(const std::vector<SampleRecord>& records, const ClassGrouping& grouping,
                           int input_size, const ClaheParams& clahe);

// Not validated, so a zero learning rate is accepted here.
class OptimizerState {
 public:
  OptimizerState(const TrainConfig& config, const ParamSet& like);
  void step(ParamSet& params, const ParamSet& grads);

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ParamSet params;  // from the epoch with the lowest validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Throws Error(configuration) on an empty split.
TrainResult train(const NetConfig& net, const TrainConfig& config, const LabeledImages& train_set,
                  const LabeledImages& val_set, const EpochCallback& on_epoch = {});

// Probabilities for every image, computed in chunks of `batch_size`.
Tensor predict(const NetConfig& net, const ParamSet& params, const std::vector<GrayImage>& images,
               int batch_size = 64);

// Lowest index wins ties.
int argmax_row(const Tensor& probs, std::size_t row);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predicted;
};

Evaluation evaluate(const NetConfig& net, const ParamSet& params, const LabeledImages& data,
                    std::span<const double> class_weights, int batch_size = 64);

// `epoch,train_loss,val_loss,train_acc,val_acc`
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace irispad
