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

#ifndef ROTCONV_IO_MODEL_HPP
#define ROTCONV_IO_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rotconv/ai/ai_prune.hpp"
#include "rotconv/nn/conv.hpp"
#include "rotconv/nn/layers.hpp"
#include "rotconv/rotate/rotate_conv.hpp"

namespace rotconv::io {

/// Record tags of the checkpoint format.
enum class LayerTag : std::uint8_t {
  kDenseConv = 0,
  kRotatePerKernel = 1,
  kRotatePerFilter = 2,
  kAiPruned = 3,
  kBatchNorm = 4,
  kLinear = 5,
};

std::string_view tag_name(LayerTag tag);

/// A 3x3 layer under arithmetic-interpolation pruning. `dense` always holds
/// the weights described by `state` except transiently inside a training step.
template <typename T>
struct AiConvLayer {
  ai::AiLayerState state;
  nn::DenseConvLayer<T> dense;
};

template <typename T>
using Layer = std::variant<nn::DenseConvLayer<T>, rotate::RotateLayer<T>, AiConvLayer<T>,
                           nn::BatchNormLayer<T>, nn::LinearLayer<T>>;

template <typename T>
struct ModelT {
  std::vector<Layer<T>> layers;
};

using Model = ModelT<float>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
LayerTag tag_of(const Layer<T>& layer);

template <typename T>
bool is_conv_like(const Layer<T>& layer) {
  return !std::holds_alternative<nn::BatchNormLayer<T>>(layer) &&
         !std::holds_alternative<nn::LinearLayer<T>>(layer);
}

/// Record indices of the convolution-like layers (tags 0..3), in order.
/// Position in this list is the layer's "conv index".
template <typename T>
std::vector<std::size_t> conv_records(const ModelT<T>& model);

/// (out_channels, in_channels, stride, pad) of a convolution-like layer.
struct ConvDims {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t stride = 1;
  std::size_t pad = 1;
};

template <typename T>
ConvDims conv_dims(const Layer<T>& layer);

/// Prunes `dense` once and wraps it.
template <typename T>
AiConvLayer<T> make_ai_layer(nn::DenseConvLayer<T> dense, const ai::AiPruneConfig& cfg);

/// Rebuilds the dense weights from a pruned-layer record.
template <typename T>
AiConvLayer<T> restore_ai_layer(ai::AiLayerState state, std::size_t stride, std::size_t pad);

template <typename To, typename From>
ModelT<To> model_cast(const ModelT<From>& model);

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

enum class Arch : std::uint8_t { kTiny2, kTiny3, kTinyRes };

std::string_view arch_name(Arch arch);
std::optional<Arch> parse_arch(std::string_view name);

/// conv -> batchnorm -> relu [-> 2x2 max pool]
struct ConvStage {
  std::size_t conv = 0;
  std::size_t bn = 0;
  bool pool = false;
};

/// relu(x + bn_b(conv_b(relu(bn_a(conv_a(x))))))
struct ResidualStage {
  std::size_t conv_a = 0;
  std::size_t bn_a = 0;
  std::size_t conv_b = 0;
  std::size_t bn_b = 0;
};

/// flatten -> linear (logits)
struct ClassifierStage {
  std::size_t linear = 0;
};

using Stage = std::variant<ConvStage, ResidualStage, ClassifierStage>;

struct Topology {
  Arch arch = Arch::kTiny2;
  std::vector<Stage> stages;
  std::size_t record_count = 0;
};

/// Stage layout of `arch`; record indices follow the checkpoint order.
Topology topology_for(Arch arch);

/// Recognizes the architecture from the record sequence: convolution-like and
/// batchnorm records alternate and a linear record closes the model; the
/// number of convolutions selects tiny2 (2), tiny3 (3) or tiny-res (4).
/// Throws ModelError if the records fit none of them.
template <typename T>
Topology infer_topology(const ModelT<T>& model);

/// Spatial extent (h, w) at the input of every record, for a sample of
/// height x width. Non-spatial records report their input extent too.
template <typename T>
std::vector<std::pair<std::size_t, std::size_t>> record_input_extents(const ModelT<T>& model,
                                                                      const Topology& topology,
                                                                      std::size_t height,
                                                                      std::size_t width);

}  // namespace rotconv::io

#endif  // ROTCONV_IO_MODEL_HPP
