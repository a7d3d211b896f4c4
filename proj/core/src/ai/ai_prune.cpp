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

#include "rotconv/ai/ai_prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>

namespace rotconv::ai {
namespace {

template <typename T>
void require_3x3(const nn::DenseConvLayer<T>& layer) {
  layer.validate();
  if (!layer.is_3x3()) throw ShapeError("arithmetic-interpolation pruning needs a 3x3 layer");
}

// Rounds through T. Out of line because GCC 11 at -O3 merges two adjacent
// double->float->double casts into one vector op and drops the narrowing.
template <typename T>
[[gnu::noinline]] double round_through(double v) {
  return static_cast<double>(static_cast<T>(v));
}

// Ranks `points`, fills tau/w_min (rounded to T) and the per-kernel ranks.
template <typename T>
void finish_state(std::span<const ReservedPoint> points, AiLayerState& state) {
  const std::vector<std::uint32_t> ranks = build_order(points);
  std::vector<double> sorted(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) sorted[ranks[p]] = points[p].weight;
  const double tau = estimate_tolerance(sorted);
  if (tau < 0.0) throw std::logic_error("ai prune: negative tolerance from sorted weights");
  state.w_min = round_through<T>(sorted.front());
  state.tau = round_through<T>(tau);
  std::size_t p = 0;
  for (AiKernel& kernel : state.kernels) {
    kernel.ranks.resize(kernel.cells.size());
    for (std::size_t r = 0; r < kernel.cells.size(); ++r) kernel.ranks[r] = ranks[p++];
  }
}

}  // namespace

void AiPruneConfig::validate() const {
  if (k < 1 || k > kKernelCells) throw std::invalid_argument("ai prune: k must be in 1..9");
  if (!(threshold >= 0.0)) throw std::invalid_argument("ai prune: threshold must be >= 0");
  if (!(l1_lambda >= 0.0)) throw std::invalid_argument("ai prune: lambda must be >= 0");
}

template <typename T>
bool kernel_alive(std::span<const T> kernel, double threshold) {
  double m = 0.0;
  for (T v : kernel) m = std::max(m, std::abs(static_cast<double>(v)));
  return m >= threshold;
}

template <typename T>
std::vector<std::uint8_t> select_topk(std::span<const T> kernel, unsigned k) {
  if (k < 1 || k > kernel.size()) throw std::invalid_argument("select_topk: k out of range");
  std::vector<std::uint8_t> idx(kernel.size());
  std::iota(idx.begin(), idx.end(), std::uint8_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint8_t a, std::uint8_t b) {
    return std::abs(static_cast<double>(kernel[a])) > std::abs(static_cast<double>(kernel[b]));
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::uint32_t> build_order(std::span<const ReservedPoint> points) {
  if (points.size() < 2) {
    throw std::invalid_argument("build_order: need at least two reserved points, got " +
                                std::to_string(points.size()));
  }
  std::vector<std::uint32_t> order(points.size());
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const ReservedPoint& pa = points[a];
    const ReservedPoint& pb = points[b];
    return std::tie(pa.weight, pa.out, pa.in, pa.cell) <
           std::tie(pb.weight, pb.out, pb.in, pb.cell);
  });
  std::vector<std::uint32_t> ranks(points.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) ranks[order[r]] = r;
  return ranks;
}

double estimate_tolerance(std::span<const double> sorted) {
  if (sorted.size() < 2) {
    throw std::invalid_argument("estimate_tolerance: need at least two weights");
  }
  double sum = 0.0;
  for (std::size_t i = 1; i < sorted.size(); ++i) sum += sorted[i] - sorted[i - 1];
  return sum / static_cast<double>(sorted.size() - 1);
}

double interpolate(double w_min, double tau, std::uint32_t rank) {
  return w_min + tau * static_cast<double>(rank);
}

std::vector<double> interpolate(std::span<const std::uint32_t> ranks, double w_min, double tau) {
  std::vector<double> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) out[i] = interpolate(w_min, tau, ranks[i]);
  return out;
}

bool AiLayerState::alive(std::size_t out, std::size_t in) const {
  const auto it = std::lower_bound(kernels.begin(), kernels.end(), std::pair{out, in},
                                   [](const AiKernel& k, const auto& key) {
                                     return std::pair<std::size_t, std::size_t>{k.out, k.in} < key;
                                   });
  return it != kernels.end() && it->out == out && it->in == in;
}

void AiLayerState::validate() const {
  if (k < 1 || k > kKernelCells) throw std::invalid_argument("ai state: k must be in 1..9");
  const std::size_t n = point_count();
  std::vector<bool> seen(n, false);
  for (std::size_t q = 0; q < kernels.size(); ++q) {
    const AiKernel& kern = kernels[q];
    if (kern.out >= out_channels || kern.in >= in_channels) {
      throw std::invalid_argument("ai state: kernel index out of range");
    }
    if (q > 0 && std::pair{kernels[q - 1].out, kernels[q - 1].in} >= std::pair{kern.out, kern.in}) {
      throw std::invalid_argument("ai state: kernels not strictly ordered by (out, in)");
    }
    if (kern.cells.size() != k || kern.ranks.size() != k) {
      throw std::invalid_argument("ai state: kernel does not keep exactly k cells");
    }
    std::uint16_t used = 0;
    for (std::size_t r = 0; r < k; ++r) {
      const std::uint8_t cell = kern.cells[r];
      if (cell >= kKernelCells) throw std::invalid_argument("ai state: cell index >= 9");
      if ((used >> cell) & 1U) throw std::invalid_argument("ai state: duplicate cell index");
      used = static_cast<std::uint16_t>(used | (1U << cell));
      const std::uint32_t rank = kern.ranks[r];
      if (rank >= n) throw std::invalid_argument("ai state: rank >= point count");
      if (seen[rank]) throw std::invalid_argument("ai state: duplicate rank");
      seen[rank] = true;
    }
  }
}

template <typename T>
T reconstructed_weight(const AiLayerState& state, std::uint32_t rank) {
  return static_cast<T>(interpolate(state.w_min, state.tau, rank));
}

template <typename T>
void apply_state(const AiLayerState& state, nn::DenseConvLayer<T>& layer) {
  if (layer.out_channels != state.out_channels || layer.in_channels != state.in_channels) {
    throw ShapeError("apply_state: layer dims do not match the pruned state");
  }
  require_3x3(layer);
  std::fill(layer.weights.begin(), layer.weights.end(), T{0});
  for (const AiKernel& kern : state.kernels) {
    T* kernel = layer.weights.data() + (kern.out * layer.in_channels + kern.in) * kKernelCells;
    for (std::size_t r = 0; r < kern.cells.size(); ++r) {
      kernel[kern.cells[r]] = reconstructed_weight<T>(state, kern.ranks[r]);
    }
  }
}

template <typename T>
AiLayerState ai_prune_step(nn::DenseConvLayer<T>& layer, const AiPruneConfig& cfg) {
  cfg.validate();
  require_3x3(layer);
  AiLayerState state;
  state.out_channels = layer.out_channels;
  state.in_channels = layer.in_channels;
  state.k = cfg.k;
  std::vector<ReservedPoint> points;
  for (std::size_t i = 0; i < layer.out_channels; ++i) {
    for (std::size_t j = 0; j < layer.in_channels; ++j) {
      std::span<const T> kernel(layer.weights.data() + (i * layer.in_channels + j) * kKernelCells,
                                kKernelCells);
      if (!kernel_alive(kernel, cfg.threshold)) continue;
      AiKernel kern;
      kern.out = static_cast<std::uint32_t>(i);
      kern.in = static_cast<std::uint32_t>(j);
      kern.cells = select_topk(kernel, cfg.k);
      for (std::uint8_t cell : kern.cells) {
        points.push_back({kern.out, kern.in, cell, static_cast<double>(kernel[cell])});
      }
      state.kernels.push_back(std::move(kern));
    }
  }
  if (points.size() < 2) {
    state.kernels.clear();
  } else {
    finish_state<T>(points, state);
  }
  apply_state(state, layer);
  return state;
}

template <typename T>
AiLayerState reproject(nn::DenseConvLayer<T>& layer, const AiLayerState& positions) {
  require_3x3(layer);
  AiLayerState state;
  state.out_channels = layer.out_channels;
  state.in_channels = layer.in_channels;
  state.k = positions.k;
  std::vector<ReservedPoint> points;
  for (const AiKernel& src : positions.kernels) {
    AiKernel kern;
    kern.out = src.out;
    kern.in = src.in;
    kern.cells = src.cells;
    const T* kernel = layer.weights.data() + (src.out * layer.in_channels + src.in) * kKernelCells;
    for (std::uint8_t cell : kern.cells) {
      points.push_back({kern.out, kern.in, cell, static_cast<double>(kernel[cell])});
    }
    state.kernels.push_back(std::move(kern));
  }
  if (points.size() < 2) {
    state.kernels.clear();
  } else {
    finish_state<T>(points, state);
  }
  apply_state(state, layer);
  return state;
}

std::size_t rank_width_bytes(std::size_t n) {
  const std::size_t max_rank = n == 0 ? 0 : n - 1;
  if (max_rank <= 0xFFU) return 1;
  if (max_rank <= 0xFFFFU) return 2;
  return 4;
}

#define ROTCONV_INSTANTIATE_AI(T)                                                    \
  template bool kernel_alive(std::span<const T>, double);                            \
  template std::vector<std::uint8_t> select_topk(std::span<const T>, unsigned);      \
  template T reconstructed_weight<T>(const AiLayerState&, std::uint32_t);            \
  template void apply_state(const AiLayerState&, nn::DenseConvLayer<T>&);            \
  template AiLayerState ai_prune_step(nn::DenseConvLayer<T>&, const AiPruneConfig&); \
  template AiLayerState reproject(nn::DenseConvLayer<T>&, const AiLayerState&);

ROTCONV_INSTANTIATE_AI(float)
ROTCONV_INSTANTIATE_AI(double)

#undef ROTCONV_INSTANTIATE_AI

}  // namespace rotconv::ai
