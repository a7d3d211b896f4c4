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

#include "rotconv/rotate/rotate_conv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rotconv/nn/random.hpp"

namespace rotconv::rotate {
namespace {

void require_angle_range(double theta, const char* where) {
  if (!(theta >= 0.0 && theta < kHalfTurnDegrees)) {
    throw std::out_of_range(std::string(where) + ": angle " + std::to_string(theta) +
                            " outside [0, 180)");
  }
}

}  // namespace

template <typename T>
RotateLayer<T> RotateLayer<T>::zeros(std::size_t out_channels, std::size_t in_channels,
                                     AngleSharing sharing, std::size_t stride, std::size_t pad) {
  RotateLayer l;
  l.out_channels = out_channels;
  l.in_channels = in_channels;
  l.stride = stride;
  l.pad = pad;
  l.sharing = sharing;
  l.weights.assign(out_channels * in_channels * 3, T{0});
  l.angles.assign(sharing == AngleSharing::kPerKernel ? out_channels * in_channels : out_channels,
                  T{0});
  return l;
}

template <typename T>
void RotateLayer<T>::validate() const {
  if (out_channels == 0 || in_channels == 0) throw ShapeError("rotate layer dims must be positive");
  if (stride == 0) throw ShapeError("rotate layer stride must be positive");
  if (weights.size() != kernel_count() * 3) {
    throw ShapeError("rotate layer weight buffer has " + std::to_string(weights.size()) +
                     " values, expected " + std::to_string(kernel_count() * 3));
  }
  const std::size_t want = sharing == AngleSharing::kPerKernel ? kernel_count() : out_channels;
  if (angles.size() != want) {
    throw ShapeError("rotate layer angle buffer has " + std::to_string(angles.size()) +
                     " values, expected " + std::to_string(want));
  }
  for (T a : angles) require_angle_range(static_cast<double>(a), "rotate layer");
  nn::require_finite(std::span<const T>(weights), "rotate layer weights");
}

void RotateConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("rotate: epsilon must be positive");
  if (angle_lr && !(*angle_lr >= 0.0)) {
    throw std::invalid_argument("rotate: angle learning rate must be >= 0");
  }
  for (double a : fixed_angles) require_angle_range(a, "rotate fixed angle list");
}

EndpointCells endpoint_cells(double theta) {
  require_angle_range(theta, "endpoint_cells");
  const int floor_cell = static_cast<int>(std::floor(theta / kSectorDegrees));
  EndpointCells c;
  c.floor_cell = floor_cell;
  c.ceil_cell = (floor_cell + 1) % 8;
  c.opp_floor = (floor_cell + 4) % 8;
  c.opp_ceil = (c.ceil_cell + 4) % 8;
  return c;
}

double angle_fraction(double theta) {
  require_angle_range(theta, "angle_fraction");
  return std::fmod(theta, kSectorDegrees) / kSectorDegrees;
}

template <typename T>
SplitEntry<T> split_weights(T w1, T w2, double theta) {
  const EndpointCells cells = endpoint_cells(theta);
  const double f = angle_fraction(theta);
  const T ft = static_cast<T>(f);
  const T rest = static_cast<T>(1.0 - f);
  SplitEntry<T> s;
  s.fraction = f;
  s.floor_cell = cells.floor_cell;
  s.ceil_cell = cells.ceil_cell;
  s.w1b = w1 * ft;
  s.w1s = w1 * rest;
  s.w2b = w2 * ft;
  s.w2s = w2 * rest;
  return s;
}

template <typename T>
void materialize_into(const RotateLayer<T>& layer, nn::DenseConvLayer<T>& out) {
  layer.validate();
  out.out_channels = layer.out_channels;
  out.in_channels = layer.in_channels;
  out.kernel_h = 3;
  out.kernel_w = 3;
  out.stride = layer.stride;
  out.pad = layer.pad;
  out.bias.clear();
  out.weights.assign(layer.kernel_count() * 9, T{0});
  for (std::size_t i = 0; i < layer.out_channels; ++i) {
    for (std::size_t j = 0; j < layer.in_channels; ++j) {
      const double theta = static_cast<double>(layer.angle(i, j));
      const SplitEntry<T> s = split_weights(layer.weight(i, j, 1), layer.weight(i, j, 2), theta);
      T* k = out.weights.data() + (i * layer.in_channels + j) * 9;
      k[kCenterCell] = layer.weight(i, j, 0);
      k[ring_to_grid(s.floor_cell)] += s.w1s;
      k[ring_to_grid(s.ceil_cell)] += s.w1b;
      k[ring_to_grid((s.floor_cell + 4) % 8)] += s.w2s;
      k[ring_to_grid((s.ceil_cell + 4) % 8)] += s.w2b;
    }
  }
}

template <typename T>
nn::DenseConvLayer<T> materialize(const RotateLayer<T>& layer) {
  nn::DenseConvLayer<T> out;
  materialize_into(layer, out);
  return out;
}

template <typename T>
nn::Tensor4<T> rotate_forward(const nn::Tensor4<T>& input, const RotateLayer<T>& layer) {
  return nn::conv2d_forward(input, materialize(layer));
}

template <typename T>
void fold_dense_gradients(const RotateLayer<T>& layer, std::span<const T> dense_grads,
                          std::vector<T>& weight_grads, std::vector<T>& angle_grads) {
  if (dense_grads.size() != layer.kernel_count() * 9) {
    throw ShapeError("fold_dense_gradients: expected N*M*9 dense gradients");
  }
  weight_grads.assign(layer.weights.size(), T{0});
  angle_grads.assign(layer.angles.size(), T{0});
  for (std::size_t i = 0; i < layer.out_channels; ++i) {
    for (std::size_t j = 0; j < layer.in_channels; ++j) {
      const double theta = static_cast<double>(layer.angle(i, j));
      const EndpointCells cells = endpoint_cells(theta);
      const double f = angle_fraction(theta);
      const T* g = dense_grads.data() + (i * layer.in_channels + j) * 9;
      const double g1s = g[ring_to_grid(cells.floor_cell)];
      const double g1b = g[ring_to_grid(cells.ceil_cell)];
      const double g2s = g[ring_to_grid(cells.opp_floor)];
      const double g2b = g[ring_to_grid(cells.opp_ceil)];
      T* gw = weight_grads.data() + (i * layer.in_channels + j) * 3;
      gw[0] = g[kCenterCell];
      gw[1] = static_cast<T>(g1b * f + g1s * (1.0 - f));
      gw[2] = static_cast<T>(g2b * f + g2s * (1.0 - f));
      const double w1 = layer.weight(i, j, 1);
      const double w2 = layer.weight(i, j, 2);
      const double dtheta = (w1 * (g1b - g1s) + w2 * (g2b - g2s)) * kFractionSlope;
      angle_grads[layer.angle_index(i, j)] += static_cast<T>(dtheta);
    }
  }
}

template <typename T>
RotateGrads<T> rotate_backward(const nn::Tensor4<T>& input, const RotateLayer<T>& layer,
                               const nn::Tensor4<T>& grad_out, bool need_input_grad) {
  const nn::DenseConvLayer<T> dense = materialize(layer);
  nn::ConvGrads<T> cg = nn::conv2d_backward(input, dense, grad_out, need_input_grad);
  RotateGrads<T> r;
  r.input = std::move(cg.input);
  fold_dense_gradients(layer, std::span<const T>(cg.weights), r.weights, r.angles);
  return r;
}

AngleBounds angle_bounds(double theta_last, double epsilon) {
  const double small = theta_last - std::fmod(theta_last, kSectorDegrees);
  return {small - epsilon, small + kSectorDegrees + epsilon};
}

double wrap_degrees(double theta) {
  double r = std::fmod(theta, kHalfTurnDegrees);
  if (r < 0.0) r += kHalfTurnDegrees;
  // A tiny negative input can round up to exactly 180.
  if (r >= kHalfTurnDegrees) r = std::nextafter(kHalfTurnDegrees, 0.0);
  return r;
}

double angle_step(double theta_last, double delta, const RotateConfig& cfg) {
  require_angle_range(theta_last, "angle_step");
  const AngleBounds b = angle_bounds(theta_last, cfg.epsilon);
  const double candidate = std::clamp(theta_last + delta, b.lo, b.hi);
  return wrap_degrees(candidate);
}

template <typename T>
T store_angle(double theta) {
  T v = static_cast<T>(wrap_degrees(theta));
  if (v >= static_cast<T>(kHalfTurnDegrees)) {
    v = std::nextafter(static_cast<T>(kHalfTurnDegrees), T{0});
  }
  return v;
}

template <typename T>
void init_angles(RotateLayer<T>& layer, const RotateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.init == AngleInit::kFixedList) {
    if (cfg.fixed_angles.size() != layer.angles.size()) {
      throw std::invalid_argument("init_angles: fixed list has " +
                                  std::to_string(cfg.fixed_angles.size()) +
                                  " angles, layer needs " + std::to_string(layer.angles.size()));
    }
    for (std::size_t k = 0; k < layer.angles.size(); ++k) {
      layer.angles[k] = store_angle<T>(cfg.fixed_angles[k]);
    }
    return;
  }
  nn::Rng rng(seed);
  for (T& a : layer.angles) a = store_angle<T>(rng.uniform(0.0, kHalfTurnDegrees));
}

#define ROTCONV_INSTANTIATE_ROTATE(T)                                                            \
  template struct RotateLayer<T>;                                                                \
  template SplitEntry<T> split_weights(T, T, double);                                            \
  template void materialize_into(const RotateLayer<T>&, nn::DenseConvLayer<T>&);                 \
  template nn::DenseConvLayer<T> materialize(const RotateLayer<T>&);                             \
  template nn::Tensor4<T> rotate_forward(const nn::Tensor4<T>&, const RotateLayer<T>&);          \
  template void fold_dense_gradients(const RotateLayer<T>&, std::span<const T>, std::vector<T>&, \
                                     std::vector<T>&);                                           \
  template RotateGrads<T> rotate_backward(const nn::Tensor4<T>&, const RotateLayer<T>&,          \
                                          const nn::Tensor4<T>&, bool);                          \
  template T store_angle<T>(double);                                                             \
  template void init_angles(RotateLayer<T>&, const RotateConfig&, std::uint64_t);

ROTCONV_INSTANTIATE_ROTATE(float)
ROTCONV_INSTANTIATE_ROTATE(double)

#undef ROTCONV_INSTANTIATE_ROTATE

}  // namespace rotconv::rotate
