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

#ifndef ROTCONV_NN_LAYERS_HPP
#define ROTCONV_NN_LAYERS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rotconv/nn/tensor.hpp"

namespace rotconv::nn {

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormLayer {
  std::size_t channels = 0;
  // Defaults are exactly representable in f32 so a checkpointed layer
  // normalizes identically after a reload.
  double eps = static_cast<double>(1e-5F);
  double momentum = static_cast<double>(0.1F);  // weight of the new batch
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;

  /// gamma = 1, beta = 0, running mean 0 and variance 1.
  static BatchNormLayer identity(std::size_t channels);
  void validate() const;
};

template <typename T>
struct BatchNormCache {
  Tensor4<T> normalized;  // x_hat, before the affine transform
  std::vector<T> inv_std;
};

/// In training mode normalizes with batch statistics, refreshes the running
/// statistics of `layer` and fills `cache` (if given). Eval mode reads the
/// running statistics only.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNormLayer<T>& layer, Mode mode,
                             BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
  Tensor4<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

/// Backward of the training-mode forward.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const BatchNormLayer<T>& layer,
                                     const Tensor4<T>& grad_out);

// ---------------------------------------------------------------------------
// ReLU and 2x2 max pooling
// ---------------------------------------------------------------------------

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// `output` is the forward result; gradient passes where it is positive.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& output, const Tensor4<T>& grad_out);

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 window, stride 2, odd trailing rows/columns dropped.
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> maxpool2_backward(const PoolResult<T>& forward, const Shape4& input_shape,
                             const Tensor4<T>& grad_out);

// ---------------------------------------------------------------------------
// Fully connected layer
// ---------------------------------------------------------------------------

template <typename T>
struct LinearLayer {
  std::size_t out_features = 0;
  std::size_t in_features = 0;
  std::vector<T> weights;  // out x in, row-major
  std::vector<T> bias;     // empty or out

  static LinearLayer zeros(std::size_t out_features, std::size_t in_features,
                           bool with_bias = true);
  void validate() const;
};

/// Flattens each sample of `x` (c*h*w must equal in_features); output is (n, out, 1, 1).
template <typename T>
Tensor4<T> linear_forward(const Tensor4<T>& x, const LinearLayer<T>& layer);

template <typename T>
struct LinearGrads {
  Tensor4<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor4<T>& x, const LinearLayer<T>& layer,
                               const Tensor4<T>& grad_out);

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxXent {
  double loss = 0.0;         // mean over the batch
  Tensor4<T> probabilities;  // (n, classes, 1, 1)
};

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor4<T>& logits, std::span<const std::int32_t> labels);

/// d(mean loss)/d(logits).
template <typename T>
Tensor4<T> softmax_xent_backward(const Tensor4<T>& probabilities,
                                 std::span<const std::int32_t> labels);

}  // namespace rotconv::nn

#endif  // ROTCONV_NN_LAYERS_HPP
