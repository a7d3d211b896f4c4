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

#include "rotconv/nn/optim.hpp"

#include <string>

#include "rotconv/nn/tensor.hpp"

namespace rotconv::nn {

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight decay must be >= 0");
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
              const SgdConfig& cfg) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_step: params/grads/velocity length mismatch");
  }
  debug_require_finite(grads, "sgd_step gradient");
  const T lr = static_cast<T>(cfg.lr);
  const T mu = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(cfg.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i] + wd * params[i];
    velocity[i] = mu * velocity[i] + g;
    const T update = cfg.nesterov ? g + mu * velocity[i] : velocity[i];
    params[i] -= lr * update;
  }
}

template <typename T>
void OptimState<T>::set_lr(double lr) {
  SgdConfig next = cfg_;
  next.lr = lr;
  next.validate();
  cfg_ = next;
}

template <typename T>
std::span<T> OptimState<T>::velocity(std::size_t slot, std::size_t size) {
  if (slot >= velocities_.size()) velocities_.resize(slot + 1);
  auto& v = velocities_[slot];
  if (v.empty()) {
    v.assign(size, T{0});
  } else if (v.size() != size) {
    throw ShapeError("optimizer slot " + std::to_string(slot) + " changed size");
  }
  return v;
}

template <typename T>
void OptimState<T>::step(std::size_t slot, std::span<T> params, std::span<const T> grads) {
  sgd_step(params, grads, velocity(slot, params.size()), cfg_);
}

template <typename T>
std::vector<T> l1_subgradient(std::span<const T> weights, double lambda) {
  std::vector<T> g(weights.size(), T{0});
  add_l1_subgradient(weights, lambda, std::span<T>(g));
  return g;
}

template <typename T>
void add_l1_subgradient(std::span<const T> weights, double lambda, std::span<T> grad) {
  if (weights.size() != grad.size()) throw ShapeError("l1: weight/grad length mismatch");
  if (lambda < 0.0) throw std::invalid_argument("l1: lambda must be >= 0");
  if (lambda == 0.0) return;
  const T l = static_cast<T>(lambda);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > T{0}) {
      grad[i] += l;
    } else if (weights[i] < T{0}) {
      grad[i] -= l;
    }
  }
}

template void sgd_step(std::span<float>, std::span<const float>, std::span<float>,
                       const SgdConfig&);
template void sgd_step(std::span<double>, std::span<const double>, std::span<double>,
                       const SgdConfig&);
template class OptimState<float>;
template class OptimState<double>;
template std::vector<float> l1_subgradient(std::span<const float>, double);
template std::vector<double> l1_subgradient(std::span<const double>, double);
template void add_l1_subgradient(std::span<const float>, double, std::span<float>);
template void add_l1_subgradient(std::span<const double>, double, std::span<double>);

}  // namespace rotconv::nn
