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

#include "rotconv/harness/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <variant>

#include "rotconv/nn/random.hpp"

namespace rotconv::harness {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

nn::DenseConvLayer<float> he_conv(std::size_t out, std::size_t in, nn::Rng& rng) {
  auto l = nn::DenseConvLayer<float>::zeros(out, in);
  const double sd = std::sqrt(2.0 / static_cast<double>(in * 9));
  for (auto& w : l.weights) w = static_cast<float>(sd * rng.normal());
  return l;
}

nn::LinearLayer<float> uniform_linear(std::size_t out, std::size_t in, nn::Rng& rng) {
  auto l = nn::LinearLayer<float>::zeros(out, in, true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-bound, bound));
  return l;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t parse_index(std::string_view s, std::string_view selection) {
  s = trim(s);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("malformed layer selection \"" + std::string(selection) + "\"");
  }
  return v;
}

template <typename T>
void add_into(nn::Tensor4<T>& dst, const nn::Tensor4<T>& src) {
  auto d = dst.span();
  auto s = src.span();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

BuiltNetwork build_network(io::Arch arch, std::size_t in_channels, std::size_t height,
                           std::size_t width, std::size_t num_classes, std::uint64_t seed) {
  if (in_channels == 0 || num_classes == 0 || height < 4 || width < 4) {
    throw io::ModelError("network needs channels, classes and an input of at least 4x4");
  }
  nn::Rng rng(seed);
  BuiltNetwork net;
  auto& layers = net.model.layers;
  auto conv_bn = [&](std::size_t out, std::size_t in) {
    layers.emplace_back(he_conv(out, in, rng));
    layers.emplace_back(nn::BatchNormLayer<float>::identity(out));
  };
  conv_bn(16, in_channels);
  if (arch == io::Arch::kTinyRes) {
    conv_bn(16, 16);
    conv_bn(16, 16);
  }
  conv_bn(32, 16);
  if (arch == io::Arch::kTiny3) conv_bn(32, 32);
  layers.emplace_back(uniform_linear(num_classes, 32 * (height / 4) * (width / 4), rng));

  net.topology = io::topology_for(arch);
  const std::size_t convs = io::conv_records(net.model).size();
  net.prunable.assign(convs, true);
  net.prunable[0] = false;
  return net;
}

BuiltNetwork build_network(std::string_view arch, std::size_t in_channels, std::size_t height,
                           std::size_t width, std::size_t num_classes, std::uint64_t seed) {
  const auto parsed = io::parse_arch(arch);
  if (!parsed) {
    throw io::ModelError("unknown network \"" + std::string(arch) +
                         "\" (expected tiny2, tiny3 or tiny-res)");
  }
  return build_network(*parsed, in_channels, height, width, num_classes, seed);
}

std::vector<std::size_t> parse_layer_selection(std::string_view selection, std::size_t conv_count) {
  const std::string_view s = trim(selection);
  std::vector<std::size_t> out;
  auto range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
  };
  if (s == "all-but-first") {
    range(std::min<std::size_t>(1, conv_count), conv_count);
  } else if (s == "all") {
    range(0, conv_count);
  } else if (s == "none" || s.empty()) {
  } else if (s.starts_with("first:")) {
    range(0, std::min(conv_count, parse_index(s.substr(6), selection)));
  } else if (s.starts_with("last:")) {
    const std::size_t n = std::min(conv_count, parse_index(s.substr(5), selection));
    range(conv_count - n, conv_count);
  } else {
    std::string_view rest = s;
    while (true) {
      const auto comma = rest.find(',');
      const std::size_t v = parse_index(rest.substr(0, comma), selection);
      if (v >= conv_count) {
        throw std::invalid_argument("layer " + std::to_string(v) + " out of range; model has " +
                                    std::to_string(conv_count) + " convolutions");
      }
      out.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string_view method_name(PruneMethod method) {
  switch (method) {
    case PruneMethod::kNone:
      return "none";
    case PruneMethod::kRotate4:
      return "rotate4";
    case PruneMethod::kRotate3:
      return "rotate3";
    case PruneMethod::kAi:
      return "ai";
  }
  return "unknown";
}

std::optional<PruneMethod> parse_method(std::string_view name) {
  for (auto m :
       {PruneMethod::kNone, PruneMethod::kRotate4, PruneMethod::kRotate3, PruneMethod::kAi}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

template <typename T>
nn::DenseConvLayer<T> dense_equivalent(const io::Layer<T>& layer) {
  return std::visit(Overloaded{
                        [](const nn::DenseConvLayer<T>& l) { return l; },
                        [](const rotate::RotateLayer<T>& l) { return rotate::materialize(l); },
                        [](const io::AiConvLayer<T>& l) { return l.dense; },
                        [](const auto&) -> nn::DenseConvLayer<T> {
                          throw io::ModelError("record is not a convolution");
                        },
                    },
                    layer);
}

template <typename T>
rotate::RotateLayer<T> rotate_from_dense(const nn::DenseConvLayer<T>& dense,
                                         rotate::AngleSharing sharing,
                                         const rotate::RotateConfig& cfg, std::uint64_t seed) {
  if (!dense.is_3x3()) throw io::ModelError("only 3x3 convolutions can be rotated");
  auto l = rotate::RotateLayer<T>::zeros(dense.out_channels, dense.in_channels, sharing,
                                         dense.stride, dense.pad);
  for (std::size_t i = 0; i < l.out_channels; ++i) {
    for (std::size_t j = 0; j < l.in_channels; ++j) {
      l.weight(i, j, 0) = dense.weight(i, j, 1, 1);
      l.weight(i, j, 1) = dense.weight(i, j, 1, 2);
      l.weight(i, j, 2) = dense.weight(i, j, 1, 0);
    }
  }
  rotate::init_angles(l, cfg, seed);
  return l;
}

template <typename T>
void apply_method(io::ModelT<T>& model, PruneMethod method,
                  const std::vector<std::size_t>& conv_indices, const MethodConfig& cfg) {
  if (method == PruneMethod::kNone) return;
  const auto records = io::conv_records(model);
  for (std::size_t c : conv_indices) {
    if (c >= records.size()) {
      throw io::ModelError("conv index " + std::to_string(c) + " out of range");
    }
    io::Layer<T>& slot = model.layers[records[c]];
    nn::DenseConvLayer<T> dense = dense_equivalent(slot);
    if (!dense.is_3x3()) {
      throw io::ModelError("conv " + std::to_string(c) + " is not 3x3 and cannot be pruned");
    }
    switch (method) {
      case PruneMethod::kRotate4:
        slot = rotate_from_dense(dense, rotate::AngleSharing::kPerKernel, cfg.rotate, cfg.seed + c);
        break;
      case PruneMethod::kRotate3:
        slot = rotate_from_dense(dense, rotate::AngleSharing::kPerFilter, cfg.rotate, cfg.seed + c);
        break;
      case PruneMethod::kAi:
        slot = io::make_ai_layer(std::move(dense), cfg.ai);
        break;
      case PruneMethod::kNone:
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(io::ModelT<T>& model) : Network(model, io::infer_topology(model)) {}

template <typename T>
Network<T>::Network(io::ModelT<T>& model, io::Topology topology)
    : model_(model), topology_(std::move(topology)) {
  if (topology_.record_count != model_.layers.size()) {
    throw io::ModelError("topology does not match the model's record count");
  }
  inputs_.resize(model_.layers.size());
  bn_caches_.resize(model_.layers.size());
  materialized_.resize(model_.layers.size());
  stages_.resize(topology_.stages.size());
}

template <typename T>
nn::Tensor4<T> Network<T>::conv_forward(std::size_t record, const nn::Tensor4<T>& x, bool train) {
  if (train) inputs_[record] = x;
  return std::visit(
      Overloaded{
          [&](const nn::DenseConvLayer<T>& l) { return nn::conv2d_forward(x, l); },
          [&](const rotate::RotateLayer<T>& l) {
            rotate::materialize_into(l, materialized_[record]);
            return nn::conv2d_forward(x, materialized_[record]);
          },
          [&](const io::AiConvLayer<T>& l) { return nn::conv2d_forward(x, l.dense); },
          [&](const auto&) -> nn::Tensor4<T> {
            throw io::ModelError("record " + std::to_string(record) + " is not a convolution");
          },
      },
      model_.layers[record]);
}

template <typename T>
nn::Tensor4<T> Network<T>::bn_forward(std::size_t record, const nn::Tensor4<T>& x, nn::Mode mode) {
  auto& bn = std::get<nn::BatchNormLayer<T>>(model_.layers[record]);
  return nn::batchnorm_forward(x, bn, mode,
                               mode == nn::Mode::kTrain ? &bn_caches_[record] : nullptr);
}

template <typename T>
nn::Tensor4<T> Network<T>::forward(const nn::Tensor4<T>& input, nn::Mode mode) {
  const bool train = mode == nn::Mode::kTrain;
  have_cache_ = train;
  nn::Tensor4<T> cur = input;
  for (std::size_t s = 0; s < topology_.stages.size(); ++s) {
    StageCache& cache = stages_[s];
    std::visit(
        Overloaded{
            [&](const io::ConvStage& st) {
              cur = nn::relu_forward(bn_forward(st.bn, conv_forward(st.conv, cur, train), mode));
              if (st.pool) {
                auto pooled = nn::maxpool2_forward(cur);
                if (train) {
                  cache.relu_out = std::move(cur);
                  cache.pre_pool = cache.relu_out.shape();
                  cur = pooled.output;
                  cache.pool = std::move(pooled);
                } else {
                  cur = std::move(pooled.output);
                }
              } else if (train) {
                cache.relu_out = cur;
              }
            },
            [&](const io::ResidualStage& st) {
              auto a =
                  nn::relu_forward(bn_forward(st.bn_a, conv_forward(st.conv_a, cur, train), mode));
              auto b = bn_forward(st.bn_b, conv_forward(st.conv_b, a, train), mode);
              add_into(b, cur);
              cur = nn::relu_forward(b);
              if (train) {
                cache.relu_inner = std::move(a);
                cache.relu_out = cur;
              }
            },
            [&](const io::ClassifierStage& st) {
              if (train) inputs_[st.linear] = cur;
              cur = nn::linear_forward(cur, std::get<nn::LinearLayer<T>>(model_.layers[st.linear]));
            },
        },
        topology_.stages[s]);
  }
  return cur;
}

template <typename T>
nn::Tensor4<T> Network<T>::conv_backward(std::size_t record, const nn::Tensor4<T>& g,
                                         bool need_input, RecordGrads<T>& out) {
  const nn::Tensor4<T>& x = inputs_[record];
  return std::visit(
      Overloaded{
          [&](const nn::DenseConvLayer<T>& l) {
            auto r = nn::conv2d_backward(x, l, g, need_input);
            out.weights = std::move(r.weights);
            out.bias = std::move(r.bias);
            return std::move(r.input);
          },
          [&](const rotate::RotateLayer<T>& l) {
            auto r = nn::conv2d_backward(x, materialized_[record], g, need_input);
            rotate::fold_dense_gradients(l, std::span<const T>(r.weights), out.weights, out.angles);
            return std::move(r.input);
          },
          [&](const io::AiConvLayer<T>& l) {
            auto r = nn::conv2d_backward(x, l.dense, g, need_input);
            out.weights = std::move(r.weights);
            out.bias = std::move(r.bias);
            return std::move(r.input);
          },
          [&](const auto&) -> nn::Tensor4<T> {
            throw io::ModelError("record " + std::to_string(record) + " is not a convolution");
          },
      },
      model_.layers[record]);
}

template <typename T>
nn::Tensor4<T> Network<T>::bn_backward(std::size_t record, const nn::Tensor4<T>& g,
                                       RecordGrads<T>& out) {
  auto r = nn::batchnorm_backward(bn_caches_[record],
                                  std::get<nn::BatchNormLayer<T>>(model_.layers[record]), g);
  out.weights = std::move(r.gamma);
  out.bias = std::move(r.beta);
  return std::move(r.input);
}

template <typename T>
Backprop<T> Network<T>::backward(const nn::Tensor4<T>& grad_logits, bool need_input_grad) {
  if (!have_cache_) throw io::ModelError("backward needs a preceding training-mode forward");
  Backprop<T> bp;
  bp.records.resize(model_.layers.size());
  nn::Tensor4<T> g = grad_logits;
  for (std::size_t s = topology_.stages.size(); s-- > 0;) {
    StageCache& cache = stages_[s];
    const bool need_input = s > 0 || need_input_grad;
    std::visit(Overloaded{
                   [&](const io::ClassifierStage& st) {
                     auto r = nn::linear_backward(
                         inputs_[st.linear], std::get<nn::LinearLayer<T>>(model_.layers[st.linear]),
                         g);
                     bp.records[st.linear].weights = std::move(r.weights);
                     bp.records[st.linear].bias = std::move(r.bias);
                     g = std::move(r.input);
                   },
                   [&](const io::ConvStage& st) {
                     if (st.pool) g = nn::maxpool2_backward(cache.pool, cache.pre_pool, g);
                     g = nn::relu_backward(cache.relu_out, g);
                     g = bn_backward(st.bn, g, bp.records[st.bn]);
                     g = conv_backward(st.conv, g, need_input, bp.records[st.conv]);
                   },
                   [&](const io::ResidualStage& st) {
                     g = nn::relu_backward(cache.relu_out, g);
                     nn::Tensor4<T> skip = g;
                     g = bn_backward(st.bn_b, g, bp.records[st.bn_b]);
                     g = conv_backward(st.conv_b, g, true, bp.records[st.conv_b]);
                     g = nn::relu_backward(cache.relu_inner, g);
                     g = bn_backward(st.bn_a, g, bp.records[st.bn_a]);
                     g = conv_backward(st.conv_a, g, true, bp.records[st.conv_a]);
                     add_into(g, skip);
                   },
               },
               topology_.stages[s]);
  }
  if (need_input_grad) bp.input = std::move(g);
  return bp;
}

#define ROTCONV_INSTANTIATE_NETWORK(T)                                                           \
  template nn::DenseConvLayer<T> dense_equivalent(const io::Layer<T>&);                          \
  template rotate::RotateLayer<T> rotate_from_dense(const nn::DenseConvLayer<T>&,                \
                                                    rotate::AngleSharing,                        \
                                                    const rotate::RotateConfig&, std::uint64_t); \
  template void apply_method(io::ModelT<T>&, PruneMethod, const std::vector<std::size_t>&,       \
                             const MethodConfig&);                                               \
  template class Network<T>;

ROTCONV_INSTANTIATE_NETWORK(float)
ROTCONV_INSTANTIATE_NETWORK(double)

#undef ROTCONV_INSTANTIATE_NETWORK

}  // namespace rotconv::harness
