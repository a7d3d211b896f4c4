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

#ifndef ROTCONV_NN_OPTIM_HPP
#define ROTCONV_NN_OPTIM_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace rotconv::nn {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;

  /// lr > 0, momentum in [0, 1), weight_decay >= 0.
  void validate() const;
};

/// One SGD step without dampening. Weight decay is folded into the gradient
/// before the momentum update:
///
///   g' = g + wd * p
///   v  = mu * v + g'
///   p -= lr * (g' + mu * v)      (Nesterov)
///   p -= lr * v                  (classical)
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
              const SgdConfig& cfg);

/// Velocity buffers for a fixed set of parameter slots.
template <typename T>
class OptimState {
 public:
  explicit OptimState(SgdConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  [[nodiscard]] const SgdConfig& config() const { return cfg_; }
  void set_lr(double lr);

  /// Velocity of `slot`, zero-initialized on first use. Throws ShapeError if
  /// a later call asks for a different size.
  std::span<T> velocity(std::size_t slot, std::size_t size);

  /// sgd_step on `slot` with this state's hyperparameters.
  void step(std::size_t slot, std::span<T> params, std::span<const T> grads);

 private:
  SgdConfig cfg_;
  std::vector<std::vector<T>> velocities_;
};

/// lambda * sign(w), sign(0) = 0.
template <typename T>
std::vector<T> l1_subgradient(std::span<const T> weights, double lambda);

/// grad += lambda * sign(w).
template <typename T>
void add_l1_subgradient(std::span<const T> weights, double lambda, std::span<T> grad);

}  // namespace rotconv::nn

#endif  // ROTCONV_NN_OPTIM_HPP
