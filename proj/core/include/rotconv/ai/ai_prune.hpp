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

#ifndef ROTCONV_AI_AI_PRUNE_HPP
#define ROTCONV_AI_AI_PRUNE_HPP

// Arithmetic-interpolation pruning of 3x3 convolution layers.
//
// Every kernel whose largest |weight| reaches the drop threshold keeps its k
// largest-magnitude cells; all other cells, and all dead kernels, are zeroed.
// The kept values of the whole layer are then ranked by signed value and
// replaced with an arithmetic progression
//
//   value(rank) = w_min + tau * rank,   rank = 0 .. n-1
//
// so a pruned layer is described by two reals plus, per kept cell, its grid
// position and rank.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rotconv/nn/conv.hpp"

namespace rotconv::ai {

inline constexpr std::size_t kKernelCells = 9;

struct AiPruneConfig {
  unsigned k = 3;                   // cells kept per alive kernel, 1..9
  double threshold = 0.001;         // kernel drop threshold on max |w|
  double l1_lambda = 0.0;           // L1 coefficient used while training
  std::vector<std::size_t> layers;  // conv indices the method applies to

  void validate() const;
};

/// max |w| >= threshold.
template <typename T>
bool kernel_alive(std::span<const T> kernel, double threshold);

/// Grid indices (0..8, row-major) of the k largest |w|, lower index first on
/// ties; returned in ascending index order.
template <typename T>
std::vector<std::uint8_t> select_topk(std::span<const T> kernel, unsigned k);

struct ReservedPoint {
  std::uint32_t out = 0;
  std::uint32_t in = 0;
  std::uint8_t cell = 0;
  double weight = 0.0;
};

/// Rank of every point when sorted by signed weight ascending, ties broken by
/// (out, in, cell). Throws std::invalid_argument for fewer than two points.
std::vector<std::uint32_t> build_order(std::span<const ReservedPoint> points);

/// Mean successive gap of ascending `sorted` weights. Needs n >= 2.
double estimate_tolerance(std::span<const double> sorted);

/// w_min + tau * rank.
double interpolate(double w_min, double tau, std::uint32_t rank);
std::vector<double> interpolate(std::span<const std::uint32_t> ranks, double w_min, double tau);

struct AiKernel {
  std::uint32_t out = 0;
  std::uint32_t in = 0;
  std::vector<std::uint8_t> cells;   // k distinct grid indices, ascending
  std::vector<std::uint32_t> ranks;  // rank of each cell in the layer order
};

struct AiLayerState {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  unsigned k = 3;
  double w_min = 0.0;
  double tau = 0.0;
  std::vector<AiKernel> kernels;  // alive kernels, ascending (out, in)

  [[nodiscard]] std::size_t point_count() const { return kernels.size() * k; }
  [[nodiscard]] bool empty() const { return kernels.empty(); }
  [[nodiscard]] bool alive(std::size_t out, std::size_t in) const;
  [[nodiscard]] std::size_t alive_count() const { return kernels.size(); }

  /// Throws std::invalid_argument unless cells are distinct and < 9, kernels
  /// are sorted and in range, and ranks are a permutation of 0..n-1.
  void validate() const;
};

/// Stored value for `rank`, rounded to T.
template <typename T>
T reconstructed_weight(const AiLayerState& state, std::uint32_t rank);

/// Zeroes `layer` and writes the progression values at the recorded cells.
template <typename T>
void apply_state(const AiLayerState& state, nn::DenseConvLayer<T>& layer);

/// Select, rank, estimate tau and project `layer` in place. A layer left with
/// fewer than two kept cells is zeroed entirely and reported as empty. For
/// T = float, w_min and tau are rounded to float before the progression is
/// written, so the layer matches what a float checkpoint restores.
template <typename T>
AiLayerState ai_prune_step(nn::DenseConvLayer<T>& layer, const AiPruneConfig& cfg);

/// Order/tolerance/interpolation with the kept cells of `positions` held fixed.
template <typename T>
AiLayerState reproject(nn::DenseConvLayer<T>& layer, const AiLayerState& positions);

/// Minimal byte width (1, 2 or 4) able to hold ranks 0..n-1.
std::size_t rank_width_bytes(std::size_t n);

}  // namespace rotconv::ai

#endif  // ROTCONV_AI_AI_PRUNE_HPP
