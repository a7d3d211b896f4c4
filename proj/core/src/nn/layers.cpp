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

#include "rotconv/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rotconv::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

// --- batch norm -------------------------------------------------------------

template <typename T>
BatchNormLayer<T> BatchNormLayer<T>::identity(std::size_t channels) {
  if (channels == 0) throw ShapeError("batchnorm needs at least one channel");
  BatchNormLayer l;
  l.channels = channels;
  l.gamma.assign(channels, T{1});
  l.beta.assign(channels, T{0});
  l.running_mean.assign(channels, T{0});
  l.running_var.assign(channels, T{1});
  return l;
}

template <typename T>
void BatchNormLayer<T>::validate() const {
  if (channels == 0) throw ShapeError("batchnorm needs at least one channel");
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw ShapeError("batchnorm parameter length does not match channel count");
  }
}

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNormLayer<T>& layer, Mode mode,
                             BatchNormCache<T>* cache) {
  layer.validate();
  if (x.c() != layer.channels) {
    throw ShapeError("batchnorm: input has " + std::to_string(x.c()) + " channels, layer has " +
                     std::to_string(layer.channels));
  }
  debug_require_finite(x.span(), "batchnorm_forward input");
  const std::size_t plane = x.h() * x.w();
  const std::size_t count = x.n() * plane;
  Tensor4<T> y(x.shape());
  std::vector<T> inv_std(layer.channels);
  std::vector<T> mean(layer.channels);

  for (std::size_t c = 0; c < layer.channels; ++c) {
    if (mode == Mode::kTrain) {
      if (count == 0) throw ShapeError("batchnorm: empty batch in training mode");
      double sum = 0.0;
      for (std::size_t n = 0; n < x.n(); ++n) {
        const T* p = &x(n, c, 0, 0);
        for (std::size_t k = 0; k < plane; ++k) sum += p[k];
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < x.n(); ++n) {
        const T* p = &x(n, c, 0, 0);
        for (std::size_t k = 0; k < plane; ++k) {
          const double d = p[k] - mu;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + layer.eps));
      const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
      layer.running_mean[c] =
          static_cast<T>((1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mu);
      layer.running_var[c] =
          static_cast<T>((1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * unbiased);
    } else {
      mean[c] = layer.running_mean[c];
      inv_std[c] =
          static_cast<T>(1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) + layer.eps));
    }
  }

  Tensor4<T> xhat;
  if (cache != nullptr) xhat = Tensor4<T>(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < layer.channels; ++c) {
      const T* src = &x(n, c, 0, 0);
      T* dst = &y(n, c, 0, 0);
      T* nrm = cache != nullptr ? &xhat(n, c, 0, 0) : nullptr;
      const T m = mean[c];
      const T s = inv_std[c];
      const T g = layer.gamma[c];
      const T b = layer.beta[c];
      for (std::size_t k = 0; k < plane; ++k) {
        const T v = (src[k] - m) * s;
        if (nrm != nullptr) nrm[k] = v;
        dst[k] = g * v + b;
      }
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const BatchNormLayer<T>& layer,
                                     const Tensor4<T>& grad_out) {
  const Tensor4<T>& xhat = cache.normalized;
  if (grad_out.shape() != xhat.shape()) {
    throw ShapeError("batchnorm_backward: grad_out shape mismatch");
  }
  const std::size_t plane = xhat.h() * xhat.w();
  const double count = static_cast<double>(xhat.n() * plane);
  BatchNormGrads<T> g;
  g.input = Tensor4<T>(xhat.shape());
  g.gamma.assign(layer.channels, T{0});
  g.beta.assign(layer.channels, T{0});
  for (std::size_t c = 0; c < layer.channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < xhat.n(); ++n) {
      const T* dy = &grad_out(n, c, 0, 0);
      const T* xh = &xhat(n, c, 0, 0);
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += dy[k];
        sum_dy_xhat += static_cast<double>(dy[k]) * xh[k];
      }
    }
    g.gamma[c] = static_cast<T>(sum_dy_xhat);
    g.beta[c] = static_cast<T>(sum_dy);
    const double scale = static_cast<double>(layer.gamma[c]) * cache.inv_std[c] / count;
    const double mean_dy = sum_dy;
    const double mean_dy_xhat = sum_dy_xhat;
    for (std::size_t n = 0; n < xhat.n(); ++n) {
      const T* dy = &grad_out(n, c, 0, 0);
      const T* xh = &xhat(n, c, 0, 0);
      T* dx = &g.input(n, c, 0, 0);
      for (std::size_t k = 0; k < plane; ++k) {
        dx[k] = static_cast<T>(scale * (count * dy[k] - mean_dy - xh[k] * mean_dy_xhat));
      }
    }
  }
  return g;
}

// --- relu / pool --------------------------------------------------------------

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& output, const Tensor4<T>& grad_out) {
  if (output.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor4<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    g[i] = output[i] > T{0} ? grad_out[i] : T{0};
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x) {
  const std::size_t oh = x.h() / 2;
  const std::size_t ow = x.w() / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool2: input smaller than 2x2");
  PoolResult<T> r;
  r.output = Tensor4<T>({x.n(), x.c(), oh, ow});
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j, ++o) {
          std::size_t best = x.index(n, c, 2 * i, 2 * j);
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = x.index(n, c, 2 * i + di, 2 * j + dj);
              if (x[idx] > x[best]) best = idx;
            }
          }
          r.output[o] = x[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool2_backward(const PoolResult<T>& forward, const Shape4& input_shape,
                             const Tensor4<T>& grad_out) {
  if (grad_out.shape() != forward.output.shape()) {
    throw ShapeError("maxpool2_backward: grad_out shape mismatch");
  }
  Tensor4<T> g(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g[forward.argmax[o]] += grad_out[o];
  return g;
}

// --- linear -----------------------------------------------------------------

template <typename T>
LinearLayer<T> LinearLayer<T>::zeros(std::size_t out_features, std::size_t in_features,
                                     bool with_bias) {
  LinearLayer l;
  l.out_features = out_features;
  l.in_features = in_features;
  l.weights.assign(out_features * in_features, T{0});
  if (with_bias) l.bias.assign(out_features, T{0});
  return l;
}

template <typename T>
void LinearLayer<T>::validate() const {
  if (out_features == 0 || in_features == 0) throw ShapeError("linear dims must be positive");
  if (weights.size() != out_features * in_features) {
    throw ShapeError("linear weight buffer length mismatch");
  }
  if (!bias.empty() && bias.size() != out_features) {
    throw ShapeError("linear bias length mismatch");
  }
}

template <typename T>
Tensor4<T> linear_forward(const Tensor4<T>& x, const LinearLayer<T>& layer) {
  layer.validate();
  if (x.shape().item() != layer.in_features) {
    throw ShapeError("linear: sample has " + std::to_string(x.shape().item()) +
                     " features, layer expects " + std::to_string(layer.in_features));
  }
  debug_require_finite(x.span(), "linear_forward input");
  const auto n = static_cast<Eigen::Index>(x.n());
  const auto in = static_cast<Eigen::Index>(layer.in_features);
  const auto out = static_cast<Eigen::Index>(layer.out_features);
  Tensor4<T> y({x.n(), layer.out_features, 1, 1});
  Eigen::Map<const RowMat<T>> X(x.data(), n, in);
  Eigen::Map<const RowMat<T>> W(layer.weights.data(), out, in);
  Eigen::Map<RowMat<T>> Y(y.data(), n, out);
  Y.noalias() = X * W.transpose();
  if (!layer.bias.empty()) {
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < out; ++c) Y(r, c) += layer.bias[static_cast<std::size_t>(c)];
    }
  }
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor4<T>& x, const LinearLayer<T>& layer,
                               const Tensor4<T>& grad_out) {
  layer.validate();
  if (grad_out.shape() != Shape4{x.n(), layer.out_features, 1, 1}) {
    throw ShapeError("linear_backward: grad_out shape mismatch");
  }
  const auto n = static_cast<Eigen::Index>(x.n());
  const auto in = static_cast<Eigen::Index>(layer.in_features);
  const auto out = static_cast<Eigen::Index>(layer.out_features);
  LinearGrads<T> g;
  g.input = Tensor4<T>(x.shape());
  g.weights.assign(layer.weights.size(), T{0});
  Eigen::Map<const RowMat<T>> X(x.data(), n, in);
  Eigen::Map<const RowMat<T>> W(layer.weights.data(), out, in);
  Eigen::Map<const RowMat<T>> GY(grad_out.data(), n, out);
  Eigen::Map<RowMat<T>>(g.weights.data(), out, in).noalias() = GY.transpose() * X;
  Eigen::Map<RowMat<T>>(g.input.data(), n, in).noalias() = GY * W;
  if (!layer.bias.empty()) {
    g.bias.assign(layer.out_features, T{0});
    for (Eigen::Index c = 0; c < out; ++c) g.bias[static_cast<std::size_t>(c)] = GY.col(c).sum();
  }
  return g;
}

// --- softmax cross-entropy ----------------------------------------------------

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor4<T>& logits, std::span<const std::int32_t> labels) {
  const std::size_t n = logits.n();
  const std::size_t k = logits.shape().item();
  if (labels.size() != n) throw ShapeError("softmax_xent: label count != batch size");
  if (k == 0) throw ShapeError("softmax_xent: no classes");
  SoftmaxXent<T> r;
  r.probabilities = Tensor4<T>({n, k, 1, 1});
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto label = labels[s];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw ShapeError("softmax_xent: label " + std::to_string(label) + " out of range");
    }
    const T* z = logits.item(s).data();
    T* p = r.probabilities.item(s).data();
    const double zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(static_cast<double>(z[c]) - zmax);
    const double log_sum = std::log(sum);
    for (std::size_t c = 0; c < k; ++c) {
      p[c] = static_cast<T>(std::exp(static_cast<double>(z[c]) - zmax - log_sum));
    }
    total += -(static_cast<double>(z[label]) - zmax - log_sum);
  }
  r.loss = n > 0 ? total / static_cast<double>(n) : 0.0;
  return r;
}

template <typename T>
Tensor4<T> softmax_xent_backward(const Tensor4<T>& probabilities,
                                 std::span<const std::int32_t> labels) {
  const std::size_t n = probabilities.n();
  const std::size_t k = probabilities.shape().item();
  if (labels.size() != n) throw ShapeError("softmax_xent_backward: label count mismatch");
  Tensor4<T> g(probabilities.shape());
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const T* p = probabilities.item(s).data();
    T* d = g.item(s).data();
    for (std::size_t c = 0; c < k; ++c) d[c] = p[c] * inv_n;
    d[labels[s]] -= inv_n;
  }
  return g;
}

#define ROTCONV_INSTANTIATE_LAYERS(T)                                                            \
  template struct BatchNormLayer<T>;                                                             \
  template Tensor4<T> batchnorm_forward(const Tensor4<T>&, BatchNormLayer<T>&, Mode,             \
                                        BatchNormCache<T>*);                                     \
  template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&,                        \
                                                const BatchNormLayer<T>&, const Tensor4<T>&);    \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                           \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                       \
  template PoolResult<T> maxpool2_forward(const Tensor4<T>&);                                    \
  template Tensor4<T> maxpool2_backward(const PoolResult<T>&, const Shape4&, const Tensor4<T>&); \
  template struct LinearLayer<T>;                                                                \
  template Tensor4<T> linear_forward(const Tensor4<T>&, const LinearLayer<T>&);                  \
  template LinearGrads<T> linear_backward(const Tensor4<T>&, const LinearLayer<T>&,              \
                                          const Tensor4<T>&);                                    \
  template SoftmaxXent<T> softmax_xent(const Tensor4<T>&, std::span<const std::int32_t>);        \
  template Tensor4<T> softmax_xent_backward(const Tensor4<T>&, std::span<const std::int32_t>);

ROTCONV_INSTANTIATE_LAYERS(float)
ROTCONV_INSTANTIATE_LAYERS(double)

#undef ROTCONV_INSTANTIATE_LAYERS

}  // namespace rotconv::nn
