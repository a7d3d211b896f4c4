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

#ifndef ROTCONV_NN_CONV_HPP
#define ROTCONV_NN_CONV_HPP

#include <cstddef>
#include <vector>

#include "rotconv/nn/tensor.hpp"

namespace rotconv::nn {

/// Square-kernel convolution bank, weights laid out N x M x kh x kw.
/// Convolution here is cross-correlation (no kernel flip) with zero padding.
template <typename T>
struct DenseConvLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
  std::vector<T> weights;
  std::vector<T> bias;  // empty when the layer has no bias

  static DenseConvLayer zeros(std::size_t out_channels, std::size_t in_channels,
                              std::size_t kernel = 3, std::size_t stride = 1, std::size_t pad = 1,
                              bool with_bias = false);

  [[nodiscard]] std::size_t kernel_area() const { return kernel_h * kernel_w; }
  [[nodiscard]] std::size_t weight_index(std::size_t i, std::size_t j, std::size_t r,
                                         std::size_t c) const {
    return ((i * in_channels + j) * kernel_h + r) * kernel_w + c;
  }
  T& weight(std::size_t i, std::size_t j, std::size_t r, std::size_t c) {
    return weights[weight_index(i, j, r, c)];
  }
  const T& weight(std::size_t i, std::size_t j, std::size_t r, std::size_t c) const {
    return weights[weight_index(i, j, r, c)];
  }
  [[nodiscard]] bool has_bias() const { return !bias.empty(); }
  [[nodiscard]] bool is_3x3() const { return kernel_h == 3 && kernel_w == 3; }

  /// Throws ShapeError if the buffers disagree with the declared dims.
  void validate() const;
};

template <typename T>
struct ConvGrads {
  Tensor4<T> input;  // empty when not requested
  std::vector<T> weights;
  std::vector<T> bias;
};

/// Output extent along one axis; throws ShapeError when the window does not fit.
std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const DenseConvLayer<T>& layer);

/// Gradients of sum(grad_out * conv2d_forward(input, layer)).
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const DenseConvLayer<T>& layer,
                             const Tensor4<T>& grad_out, bool need_input_grad = true);

template <typename To, typename From>
DenseConvLayer<To> layer_cast(const DenseConvLayer<From>& l) {
  DenseConvLayer<To> out;
  out.out_channels = l.out_channels;
  out.in_channels = l.in_channels;
  out.kernel_h = l.kernel_h;
  out.kernel_w = l.kernel_w;
  out.stride = l.stride;
  out.pad = l.pad;
  out.weights.assign(l.weights.begin(), l.weights.end());
  out.bias.assign(l.bias.begin(), l.bias.end());
  return out;
}

}  // namespace rotconv::nn

#endif  // ROTCONV_NN_CONV_HPP
