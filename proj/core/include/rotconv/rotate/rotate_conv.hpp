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

#ifndef ROTCONV_ROTATE_ROTATE_CONV_HPP
#define ROTCONV_ROTATE_ROTATE_CONV_HPP

// Rotated line-segment convolution.
//
// Each kernel is three weights on a line through the centre of a 3x3 window:
// w0 at the centre, w1 at the ring position in direction theta and w2 in
// direction theta + 180. theta is in degrees, in [0, 180). When theta is not
// a multiple of 45 the endpoint weights are split between the two ring cells
// that bracket the direction:
//
//   f(theta) = (theta mod 45) / 45
//   w_b = w * f(theta)        (ceil cell,  the next 45-degree stop)
//   w_s = w * (1 - f(theta))  (floor cell, the previous 45-degree stop)
//
// giving a dense 3x3 kernel with at most five nonzeros, which is then run
// through the ordinary convolution path.
//
// Ring cells are numbered counterclockwise from east; row offsets grow
// downwards:
//
//     3 2 1
//     4 c 0
//     5 6 7

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rotconv/nn/conv.hpp"
#include "rotconv/nn/tensor.hpp"

namespace rotconv::rotate {

inline constexpr double kSectorDegrees = 45.0;
inline constexpr double kHalfTurnDegrees = 180.0;
/// df/dtheta, per degree.
inline constexpr double kFractionSlope = 1.0 / kSectorDegrees;
inline constexpr std::size_t kCenterCell = 4;  // row-major index in the 3x3 grid

/// (row, col) offset of each ring cell relative to the centre.
inline constexpr std::array<std::array<int, 2>, 8> kRingOffsets{
    {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}}};

/// Row-major 3x3 index (0..8) of ring cell 0..7.
constexpr std::size_t ring_to_grid(int ring_cell) {
  const auto& off = kRingOffsets[static_cast<std::size_t>(ring_cell)];
  return static_cast<std::size_t>((1 + off[0]) * 3 + (1 + off[1]));
}

enum class AngleSharing : std::uint8_t {
  kPerKernel,  // one angle per (output, input) kernel: 4 values per kernel
  kPerFilter,  // one angle per output filter shared by its M kernels
};

template <typename T>
struct RotateLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t stride = 1;
  std::size_t pad = 1;
  AngleSharing sharing = AngleSharing::kPerKernel;
  std::vector<T> weights;  // N x M x 3: (w0, w1, w2)
  std::vector<T> angles;   // N*M or N values, degrees

  static RotateLayer zeros(std::size_t out_channels, std::size_t in_channels,
                           AngleSharing sharing = AngleSharing::kPerKernel, std::size_t stride = 1,
                           std::size_t pad = 1);

  [[nodiscard]] std::size_t kernel_count() const { return out_channels * in_channels; }
  [[nodiscard]] std::size_t angle_index(std::size_t i, std::size_t j) const {
    return sharing == AngleSharing::kPerKernel ? i * in_channels + j : i;
  }
  [[nodiscard]] T angle(std::size_t i, std::size_t j) const { return angles[angle_index(i, j)]; }
  T& weight(std::size_t i, std::size_t j, std::size_t k) {
    return weights[(i * in_channels + j) * 3 + k];
  }
  const T& weight(std::size_t i, std::size_t j, std::size_t k) const {
    return weights[(i * in_channels + j) * 3 + k];
  }
  /// Stored scalars: 4NM per kernel variant, 3NM + N shared.
  [[nodiscard]] std::size_t parameter_count() const { return weights.size() + angles.size(); }

  /// Buffer sizes, angle range [0, 180) and finite weights.
  void validate() const;
};

enum class AngleInit : std::uint8_t { kUniform, kFixedList };

struct RotateConfig {
  double epsilon = 5.0;            // boundary slack for angle updates, degrees
  std::optional<double> angle_lr;  // unset: follow the weight learning rate
  AngleInit init = AngleInit::kUniform;
  std::vector<double> fixed_angles;  // used with kFixedList

  void validate() const;
};

struct EndpointCells {
  int floor_cell = 0;  // ring cell at floor(theta / 45)
  int ceil_cell = 0;   // next ring cell counterclockwise
  int opp_floor = 0;   // floor_cell + 4
  int opp_ceil = 0;    // ceil_cell + 4
  friend constexpr bool operator==(const EndpointCells&, const EndpointCells&) = default;
};

/// Throws std::out_of_range unless theta is in [0, 180).
EndpointCells endpoint_cells(double theta);

/// f(theta) = (theta mod 45) / 45.
double angle_fraction(double theta);

template <typename T>
struct SplitEntry {
  double fraction = 0.0;
  int floor_cell = 0;
  int ceil_cell = 0;
  T w1b{}, w1s{}, w2b{}, w2s{};
};

template <typename T>
SplitEntry<T> split_weights(T w1, T w2, double theta);

/// Dense N x M x 3 x 3 bank equivalent to `layer`.
template <typename T>
nn::DenseConvLayer<T> materialize(const RotateLayer<T>& layer);

/// Same as materialize() but reuses `out`'s buffers.
template <typename T>
void materialize_into(const RotateLayer<T>& layer, nn::DenseConvLayer<T>& out);

template <typename T>
nn::Tensor4<T> rotate_forward(const nn::Tensor4<T>& input, const RotateLayer<T>& layer);

template <typename T>
struct RotateGrads {
  nn::Tensor4<T> input;    // empty when not requested
  std::vector<T> weights;  // N x M x 3
  std::vector<T> angles;   // per angle slot, per degree
};

template <typename T>
RotateGrads<T> rotate_backward(const nn::Tensor4<T>& input, const RotateLayer<T>& layer,
                               const nn::Tensor4<T>& grad_out, bool need_input_grad = true);

/// Chain rule from gradients of the materialized 3x3 bank to (W, T).
template <typename T>
void fold_dense_gradients(const RotateLayer<T>& layer, std::span<const T> dense_grads,
                          std::vector<T>& weight_grads, std::vector<T>& angle_grads);

struct AngleBounds {
  double lo = 0.0;  // previous 45-degree stop minus epsilon
  double hi = 0.0;  // next 45-degree stop plus epsilon
};

AngleBounds angle_bounds(double theta_last, double epsilon);

/// Bounded angle update: clamp theta_last + delta into angle_bounds(), then
/// wrap modulo 180. The result is always in [0, 180).
double angle_step(double theta_last, double delta, const RotateConfig& cfg);

/// Maps any finite angle into [0, 180).
double wrap_degrees(double theta);

/// Rounds a wrapped angle to T, keeping it strictly below 180.
template <typename T>
T store_angle(double theta);

/// Fills layer.angles from `cfg` (uniform on [0, 180) with `seed`, or the fixed list).
template <typename T>
void init_angles(RotateLayer<T>& layer, const RotateConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
RotateLayer<To> layer_cast(const RotateLayer<From>& l) {
  RotateLayer<To> out;
  out.out_channels = l.out_channels;
  out.in_channels = l.in_channels;
  out.stride = l.stride;
  out.pad = l.pad;
  out.sharing = l.sharing;
  out.weights.assign(l.weights.begin(), l.weights.end());
  out.angles.assign(l.angles.begin(), l.angles.end());
  return out;
}

}  // namespace rotconv::rotate

#endif  // ROTCONV_ROTATE_ROTATE_CONV_HPP
