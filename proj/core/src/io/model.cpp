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

#include "rotconv/io/model.hpp"

#include <type_traits>

namespace rotconv::io {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

template <typename To, typename From>
nn::BatchNormLayer<To> bn_cast(const nn::BatchNormLayer<From>& l) {
  nn::BatchNormLayer<To> out;
  out.channels = l.channels;
  out.eps = l.eps;
  out.momentum = l.momentum;
  out.gamma.assign(l.gamma.begin(), l.gamma.end());
  out.beta.assign(l.beta.begin(), l.beta.end());
  out.running_mean.assign(l.running_mean.begin(), l.running_mean.end());
  out.running_var.assign(l.running_var.begin(), l.running_var.end());
  return out;
}

template <typename To, typename From>
nn::LinearLayer<To> linear_cast(const nn::LinearLayer<From>& l) {
  nn::LinearLayer<To> out;
  out.out_features = l.out_features;
  out.in_features = l.in_features;
  out.weights.assign(l.weights.begin(), l.weights.end());
  out.bias.assign(l.bias.begin(), l.bias.end());
  return out;
}

}  // namespace

std::string_view tag_name(LayerTag tag) {
  switch (tag) {
    case LayerTag::kDenseConv:
      return "dense_conv";
    case LayerTag::kRotatePerKernel:
      return "rotate_per_kernel";
    case LayerTag::kRotatePerFilter:
      return "rotate_per_filter";
    case LayerTag::kAiPruned:
      return "ai_pruned";
    case LayerTag::kBatchNorm:
      return "batchnorm";
    case LayerTag::kLinear:
      return "linear";
  }
  return "unknown";
}

template <typename T>
LayerTag tag_of(const Layer<T>& layer) {
  return std::visit(Overloaded{
                        [](const nn::DenseConvLayer<T>&) { return LayerTag::kDenseConv; },
                        [](const rotate::RotateLayer<T>& l) {
                          return l.sharing == rotate::AngleSharing::kPerKernel
                                     ? LayerTag::kRotatePerKernel
                                     : LayerTag::kRotatePerFilter;
                        },
                        [](const AiConvLayer<T>&) { return LayerTag::kAiPruned; },
                        [](const nn::BatchNormLayer<T>&) { return LayerTag::kBatchNorm; },
                        [](const nn::LinearLayer<T>&) { return LayerTag::kLinear; },
                    },
                    layer);
}

template <typename T>
std::vector<std::size_t> conv_records(const ModelT<T>& model) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < model.layers.size(); ++r) {
    if (is_conv_like(model.layers[r])) out.push_back(r);
  }
  return out;
}

template <typename T>
ConvDims conv_dims(const Layer<T>& layer) {
  return std::visit(
      Overloaded{
          [](const nn::DenseConvLayer<T>& l) {
            return ConvDims{l.out_channels, l.in_channels, l.stride, l.pad};
          },
          [](const rotate::RotateLayer<T>& l) {
            return ConvDims{l.out_channels, l.in_channels, l.stride, l.pad};
          },
          [](const AiConvLayer<T>& l) {
            return ConvDims{l.dense.out_channels, l.dense.in_channels, l.dense.stride, l.dense.pad};
          },
          [](const auto&) -> ConvDims { throw ModelError("record is not a convolution"); },
      },
      layer);
}

template <typename T>
AiConvLayer<T> make_ai_layer(nn::DenseConvLayer<T> dense, const ai::AiPruneConfig& cfg) {
  AiConvLayer<T> out;
  out.dense = std::move(dense);
  out.state = ai::ai_prune_step(out.dense, cfg);
  return out;
}

template <typename T>
AiConvLayer<T> restore_ai_layer(ai::AiLayerState state, std::size_t stride, std::size_t pad) {
  AiConvLayer<T> out;
  out.dense = nn::DenseConvLayer<T>::zeros(state.out_channels, state.in_channels, 3, stride, pad);
  out.state = std::move(state);
  ai::apply_state(out.state, out.dense);
  return out;
}

template <typename To, typename From>
ModelT<To> model_cast(const ModelT<From>& model) {
  ModelT<To> out;
  out.layers.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    std::visit(
        Overloaded{
            [&](const nn::DenseConvLayer<From>& l) {
              out.layers.emplace_back(nn::layer_cast<To>(l));
            },
            [&](const rotate::RotateLayer<From>& l) {
              out.layers.emplace_back(rotate::layer_cast<To>(l));
            },
            [&](const AiConvLayer<From>& l) {
              out.layers.emplace_back(AiConvLayer<To>{l.state, nn::layer_cast<To>(l.dense)});
            },
            [&](const nn::BatchNormLayer<From>& l) { out.layers.emplace_back(bn_cast<To>(l)); },
            [&](const nn::LinearLayer<From>& l) { out.layers.emplace_back(linear_cast<To>(l)); },
        },
        layer);
  }
  return out;
}

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kTiny2:
      return "tiny2";
    case Arch::kTiny3:
      return "tiny3";
    case Arch::kTinyRes:
      return "tiny-res";
  }
  return "unknown";
}

std::optional<Arch> parse_arch(std::string_view name) {
  if (name == "tiny2") return Arch::kTiny2;
  if (name == "tiny3") return Arch::kTiny3;
  if (name == "tiny-res") return Arch::kTinyRes;
  return std::nullopt;
}

Topology topology_for(Arch arch) {
  Topology t;
  t.arch = arch;
  switch (arch) {
    case Arch::kTiny2:
      t.stages = {ConvStage{0, 1, true}, ConvStage{2, 3, true}, ClassifierStage{4}};
      t.record_count = 5;
      break;
    case Arch::kTiny3:
      t.stages = {ConvStage{0, 1, true}, ConvStage{2, 3, true}, ConvStage{4, 5, false},
                  ClassifierStage{6}};
      t.record_count = 7;
      break;
    case Arch::kTinyRes:
      t.stages = {ConvStage{0, 1, true}, ResidualStage{2, 3, 4, 5}, ConvStage{6, 7, true},
                  ClassifierStage{8}};
      t.record_count = 9;
      break;
  }
  return t;
}

template <typename T>
Topology infer_topology(const ModelT<T>& model) {
  const auto& layers = model.layers;
  if (layers.size() < 3 || layers.size() % 2 == 0) {
    throw ModelError("model with " + std::to_string(layers.size()) +
                     " records matches no known architecture");
  }
  const std::size_t convs = (layers.size() - 1) / 2;
  for (std::size_t c = 0; c < convs; ++c) {
    if (!is_conv_like(layers[2 * c]) ||
        !std::holds_alternative<nn::BatchNormLayer<T>>(layers[2 * c + 1])) {
      throw ModelError("record " + std::to_string(2 * c) +
                       " breaks the conv/batchnorm alternation");
    }
    const ConvDims d = conv_dims(layers[2 * c]);
    if (std::get<nn::BatchNormLayer<T>>(layers[2 * c + 1]).channels != d.out_channels) {
      throw ModelError("batchnorm record " + std::to_string(2 * c + 1) +
                       " does not match its convolution's channels");
    }
    if (c > 0 && conv_dims(layers[2 * (c - 1)]).out_channels != d.in_channels) {
      throw ModelError("record " + std::to_string(2 * c) + " input channels do not chain");
    }
  }
  if (!std::holds_alternative<nn::LinearLayer<T>>(layers.back())) {
    throw ModelError("last record must be a linear layer");
  }
  Topology t;
  switch (convs) {
    case 2:
      t = topology_for(Arch::kTiny2);
      break;
    case 3:
      t = topology_for(Arch::kTiny3);
      break;
    case 4: {
      const ConvDims a = conv_dims(layers[2]);
      const ConvDims b = conv_dims(layers[4]);
      if (a.in_channels != b.out_channels) {
        throw ModelError("residual block does not preserve channel count");
      }
      t = topology_for(Arch::kTinyRes);
      break;
    }
    default:
      throw ModelError("no known architecture has " + std::to_string(convs) + " convolutions");
  }
  return t;
}

template <typename T>
std::vector<std::pair<std::size_t, std::size_t>> record_input_extents(const ModelT<T>& model,
                                                                      const Topology& topology,
                                                                      std::size_t height,
                                                                      std::size_t width) {
  if (model.layers.size() != topology.record_count) {
    throw ModelError("topology does not match model record count");
  }
  std::vector<std::pair<std::size_t, std::size_t>> ext(model.layers.size());
  std::size_t h = height;
  std::size_t w = width;
  auto conv = [&](std::size_t rec) {
    ext[rec] = {h, w};
    const ConvDims d = conv_dims(model.layers[rec]);
    h = nn::conv_out_dim(h, 3, d.stride, d.pad);
    w = nn::conv_out_dim(w, 3, d.stride, d.pad);
  };
  for (const Stage& stage : topology.stages) {
    std::visit(Overloaded{
                   [&](const ConvStage& s) {
                     conv(s.conv);
                     ext[s.bn] = {h, w};
                     if (s.pool) {
                       h /= 2;
                       w /= 2;
                     }
                   },
                   [&](const ResidualStage& s) {
                     conv(s.conv_a);
                     ext[s.bn_a] = {h, w};
                     conv(s.conv_b);
                     ext[s.bn_b] = {h, w};
                   },
                   [&](const ClassifierStage& s) { ext[s.linear] = {h, w}; },
               },
               stage);
  }
  return ext;
}

#define ROTCONV_INSTANTIATE_MODEL(T)                                                       \
  template LayerTag tag_of(const Layer<T>&);                                               \
  template std::vector<std::size_t> conv_records(const ModelT<T>&);                        \
  template ConvDims conv_dims(const Layer<T>&);                                            \
  template AiConvLayer<T> make_ai_layer(nn::DenseConvLayer<T>, const ai::AiPruneConfig&);  \
  template AiConvLayer<T> restore_ai_layer<T>(ai::AiLayerState, std::size_t, std::size_t); \
  template Topology infer_topology(const ModelT<T>&);                                      \
  template std::vector<std::pair<std::size_t, std::size_t>> record_input_extents(          \
      const ModelT<T>&, const Topology&, std::size_t, std::size_t);

ROTCONV_INSTANTIATE_MODEL(float)
ROTCONV_INSTANTIATE_MODEL(double)

#undef ROTCONV_INSTANTIATE_MODEL

template ModelT<double> model_cast<double, float>(const ModelT<float>&);
template ModelT<float> model_cast<float, double>(const ModelT<double>&);
template ModelT<float> model_cast<float, float>(const ModelT<float>&);

}  // namespace rotconv::io
