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

#ifndef ROTCONV_HARNESS_NETWORK_HPP
#define ROTCONV_HARNESS_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rotconv/ai/ai_prune.hpp"
#include "rotconv/io/model.hpp"
#include "rotconv/nn/layers.hpp"
#include "rotconv/rotate/rotate_conv.hpp"

namespace rotconv::harness {

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

struct BuiltNetwork {
  io::Model model;
  io::Topology topology;
  std::vector<bool> prunable;  // per conv index; the first conv is excluded
};

/// tiny2:    conv(C->16) bn relu pool | conv(16->32) bn relu pool | linear
/// tiny3:    tiny2 plus conv(32->32) bn relu before the classifier
/// tiny-res: conv(C->16) bn relu pool | residual block of two conv(16->16) |
///           conv(16->32) bn relu pool | linear
/// Convolutions are 3x3, stride 1, pad 1, without bias (batchnorm follows).
BuiltNetwork build_network(io::Arch arch, std::size_t in_channels, std::size_t height,
                           std::size_t width, std::size_t num_classes, std::uint64_t seed);

/// Same, by name; throws io::ModelError for an unknown name.
BuiltNetwork build_network(std::string_view arch, std::size_t in_channels, std::size_t height,
                           std::size_t width, std::size_t num_classes, std::uint64_t seed);

/// Conv indices named by `selection`: "all-but-first", "all", "none", "first:n",
/// "last:n" or a comma-separated list. Sorted, without duplicates. Throws
/// std::invalid_argument for malformed specs or out-of-range indices.
std::vector<std::size_t> parse_layer_selection(std::string_view selection, std::size_t conv_count);

// ---------------------------------------------------------------------------
// Pruning methods
// ---------------------------------------------------------------------------

enum class PruneMethod : std::uint8_t { kNone, kRotate4, kRotate3, kAi };

std::string_view method_name(PruneMethod method);
std::optional<PruneMethod> parse_method(std::string_view name);

struct MethodConfig {
  rotate::RotateConfig rotate;
  ai::AiPruneConfig ai;
  std::uint64_t seed = 1;  // angle initialization
};

/// Dense 3x3 bank equivalent to a convolution-like record.
template <typename T>
nn::DenseConvLayer<T> dense_equivalent(const io::Layer<T>& layer);

/// RotateLayer whose (w2, w0, w1) are the centre row of `dense`; angles come
/// from init_angles(). Throws io::ModelError unless `dense` is 3x3.
template <typename T>
rotate::RotateLayer<T> rotate_from_dense(const nn::DenseConvLayer<T>& dense,
                                         rotate::AngleSharing sharing,
                                         const rotate::RotateConfig& cfg, std::uint64_t seed);

/// Converts the convolutions at `conv_indices`: rotate methods build a
/// RotateLayer from each layer's dense equivalent, ai runs one projection.
/// Layer c is seeded with cfg.seed + c, so the result does not depend on
/// which other layers are converted.
template <typename T>
void apply_method(io::ModelT<T>& model, PruneMethod method,
                  const std::vector<std::size_t>& conv_indices, const MethodConfig& cfg);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Gradients of one record. Batchnorm stores d/dgamma in `weights` and
/// d/dbeta in `bias`; pruned layers report gradients of their full dense bank.
template <typename T>
struct RecordGrads {
  std::vector<T> weights;
  std::vector<T> bias;
  std::vector<T> angles;
};

template <typename T>
struct Backprop {
  std::vector<RecordGrads<T>> records;
  nn::Tensor4<T> input;  // empty unless requested
};

/// Runs a model along its topology, keeping what backward() needs from the
/// last training-mode forward.
template <typename T>
class Network {
 public:
  explicit Network(io::ModelT<T>& model);
  Network(io::ModelT<T>& model, io::Topology topology);

  [[nodiscard]] const io::Topology& topology() const { return topology_; }

  /// Logits (n, classes, 1, 1). Training mode updates batchnorm running stats.
  nn::Tensor4<T> forward(const nn::Tensor4<T>& input, nn::Mode mode);

  Backprop<T> backward(const nn::Tensor4<T>& grad_logits, bool need_input_grad = false);

 private:
  struct StageCache {
    nn::Tensor4<T> relu_inner;  // residual stages only
    nn::Tensor4<T> relu_out;
    nn::PoolResult<T> pool;
    nn::Shape4 pre_pool{};
  };

  nn::Tensor4<T> conv_forward(std::size_t record, const nn::Tensor4<T>& x, bool train);
  nn::Tensor4<T> bn_forward(std::size_t record, const nn::Tensor4<T>& x, nn::Mode mode);
  nn::Tensor4<T> conv_backward(std::size_t record, const nn::Tensor4<T>& g, bool need_input,
                               RecordGrads<T>& out);
  nn::Tensor4<T> bn_backward(std::size_t record, const nn::Tensor4<T>& g, RecordGrads<T>& out);

  io::ModelT<T>& model_;
  io::Topology topology_;
  bool have_cache_ = false;
  std::vector<nn::Tensor4<T>> inputs_;
  std::vector<nn::BatchNormCache<T>> bn_caches_;
  std::vector<nn::DenseConvLayer<T>> materialized_;
  std::vector<StageCache> stages_;
};

}  // namespace rotconv::harness

#endif  // ROTCONV_HARNESS_NETWORK_HPP
