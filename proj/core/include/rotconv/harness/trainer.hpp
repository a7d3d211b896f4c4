// Copyright 2026 The rotconv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ROTCONV_HARNESS_TRAINER_HPP
#define ROTCONV_HARNESS_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "rotconv/harness/datasets.hpp"
#include "rotconv/harness/network.hpp"
#include "rotconv/io/model.hpp"
#include "rotconv/nn/optim.hpp"

namespace rotconv::harness {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 0.01;
  std::vector<double> milestones = {0.5, 0.75};  // fractions of the epoch budget
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda = 0.0;  // L1 coefficient on the selected layers
  std::uint64_t seed = 1;
  PruneMethod method = PruneMethod::kNone;
  std::vector<std::size_t> layers;  // selected conv indices
  unsigned k = 3;
  double threshold = 0.001;
  double epsilon = 5.0;
  std::optional<double> angle_lr;  // unset: the weight learning rate
  rotate::AngleInit angle_init = rotate::AngleInit::kUniform;
  std::vector<double> fixed_angles;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  [[nodiscard]] MethodConfig method_config() const;
  [[nodiscard]] nn::SgdConfig sgd() const;
};

/// lr / 10^(milestones reached); milestone m is reached at epoch >= m * epochs.
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean training objective over the epoch
  std::optional<double> test_acc;
  double lr = 0.0;
  std::vector<std::size_t> stored_reals;  // per record, after the epoch
};

struct MetricsLog {
  std::vector<EpochMetrics> epochs;

  /// Header "epoch,loss,test_acc,lr"; test_acc is blank without a test set.
  void write_csv(std::ostream& out) const;
};

/// One bounded angle update, as applied.
struct AngleUpdate {
  std::size_t record = 0;
  std::size_t slot = 0;
  double theta_last = 0.0;
  double raw_delta = 0.0;
  double lo = 0.0;  // clamp interval before wrapping
  double hi = 0.0;
  double theta_new = 0.0;
};

struct TrainHooks {
  std::function<void(const AngleUpdate&)> on_angle_update;
  std::function<void(std::size_t iteration, const io::Model&)> on_iteration;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Converts cfg.layers with cfg.method (model built from scratch or loaded).
void prepare_model(io::Model& model, const TrainConfig& cfg);

template <typename T>
struct Objective {
  double task_loss = 0.0;
  double loss = 0.0;  // task loss + lambda * sum |w| over the selected layers
  Backprop<T> grads;
};

/// Training-mode forward and backward of the regularized objective. The L1
/// term uses the sign subgradient with sign(0) = 0.
template <typename T>
Objective<T> objective(Network<T>& net, io::ModelT<T>& model, const nn::Tensor4<T>& input,
                       std::span<const std::int32_t> labels, double lambda,
                       const std::vector<std::size_t>& l1_convs, bool need_input_grad = false);

/// Minibatch training. After every optimizer step, pruned layers are
/// re-projected. Throws DivergenceError on a non-finite objective.
MetricsLog train(io::Model& model, const Dataset& train_set, const Dataset* test_set,
                 const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Top-1 predictions in evaluation mode.
std::vector<std::int32_t> predict(const io::Model& model, const nn::Tensor4<float>& images,
                                  std::size_t batch_size = 256);

/// Row = true label, column = prediction.
std::vector<std::vector<std::size_t>> confusion_matrix(const io::Model& model, const Dataset& data);

/// Top-1 accuracy; throws DataError when class counts disagree.
double evaluate(const io::Model& model, const Dataset& data);

/// Alive kernels over all kernels of the pruned layers (1 when there are none).
double alive_fraction(const io::Model& model);

}  // namespace rotconv::harness

#endif  // ROTCONV_HARNESS_TRAINER_HPP
