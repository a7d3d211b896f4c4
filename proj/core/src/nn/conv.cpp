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

#include "rotconv/nn/conv.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <string>

namespace rotconv::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct Geometry {
  std::size_t in_c, in_h, in_w, k_h, k_w, stride, pad, out_h, out_w;
  [[nodiscard]] std::size_t rows() const { return in_c * k_h * k_w; }
  [[nodiscard]] std::size_t cols() const { return out_h * out_w; }
};

template <typename T>
Geometry geometry_for(const Tensor4<T>& input, const DenseConvLayer<T>& layer) {
  layer.validate();
  if (input.c() != layer.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c()) +
                     " channels, layer expects " + std::to_string(layer.in_channels));
  }
  Geometry g{};
  g.in_c = input.c();
  g.in_h = input.h();
  g.in_w = input.w();
  g.k_h = layer.kernel_h;
  g.k_w = layer.kernel_w;
  g.stride = layer.stride;
  g.pad = layer.pad;
  g.out_h = conv_out_dim(g.in_h, g.k_h, g.stride, g.pad);
  g.out_w = conv_out_dim(g.in_w, g.k_w, g.stride, g.pad);
  return g;
}

// Patch matrix of one sample: row (c, kr, kc), column (oh, ow).
template <typename T>
void im2col(const T* img, const Geometry& g, T* cols) {
  const auto ih = static_cast<std::ptrdiff_t>(g.in_h);
  const auto iw = static_cast<std::ptrdiff_t>(g.in_w);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const T* plane = img + c * g.in_h * g.in_w;
    for (std::size_t kr = 0; kr < g.k_h; ++kr) {
      for (std::size_t kc = 0; kc < g.k_w; ++kc) {
        T* row = cols + ((c * g.k_h + kr) * g.k_w + kc) * g.cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto y =
              static_cast<std::ptrdiff_t>(oh * g.stride + kr) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oh * g.out_w;
          if (y < 0 || y >= ih) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = plane + y * iw;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto x = static_cast<std::ptrdiff_t>(ow * g.stride + kc) -
                           static_cast<std::ptrdiff_t>(g.pad);
            dst[ow] = (x < 0 || x >= iw) ? T{0} : src[x];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const Geometry& g, T* img) {
  const auto ih = static_cast<std::ptrdiff_t>(g.in_h);
  const auto iw = static_cast<std::ptrdiff_t>(g.in_w);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    T* plane = img + c * g.in_h * g.in_w;
    for (std::size_t kr = 0; kr < g.k_h; ++kr) {
      for (std::size_t kc = 0; kc < g.k_w; ++kc) {
        const T* row = cols + ((c * g.k_h + kr) * g.k_w + kc) * g.cols();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto y =
              static_cast<std::ptrdiff_t>(oh * g.stride + kr) - static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= ih) continue;
          const T* src = row + oh * g.out_w;
          T* dst = plane + y * iw;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto x = static_cast<std::ptrdiff_t>(ow * g.stride + kc) -
                           static_cast<std::ptrdiff_t>(g.pad);
            if (x >= 0 && x < iw) dst[x] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
DenseConvLayer<T> DenseConvLayer<T>::zeros(std::size_t out_channels, std::size_t in_channels,
                                           std::size_t kernel, std::size_t stride, std::size_t pad,
                                           bool with_bias) {
  DenseConvLayer l;
  l.out_channels = out_channels;
  l.in_channels = in_channels;
  l.kernel_h = kernel;
  l.kernel_w = kernel;
  l.stride = stride;
  l.pad = pad;
  l.weights.assign(out_channels * in_channels * kernel * kernel, T{0});
  if (with_bias) l.bias.assign(out_channels, T{0});
  return l;
}

template <typename T>
void DenseConvLayer<T>::validate() const {
  if (out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    throw ShapeError("conv layer dims must be positive");
  }
  if (stride == 0) throw ShapeError("conv stride must be positive");
  if (weights.size() != out_channels * in_channels * kernel_h * kernel_w) {
    throw ShapeError("conv weight buffer has " + std::to_string(weights.size()) +
                     " values, expected " +
                     std::to_string(out_channels * in_channels * kernel_h * kernel_w));
  }
  if (!bias.empty() && bias.size() != out_channels) {
    throw ShapeError("conv bias length does not match output channels");
  }
}

std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv stride must be positive");
  if (in + 2 * pad < kernel) {
    throw ShapeError("conv window " + std::to_string(kernel) + " does not fit padded extent " +
                     std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const DenseConvLayer<T>& layer) {
  const Geometry g = geometry_for(input, layer);
  debug_require_finite(input.span(), "conv2d_forward input");
  Tensor4<T> out({input.n(), layer.out_channels, g.out_h, g.out_w});
  std::vector<T> cols(g.rows() * g.cols());
  ConstMapMat<T> w(layer.weights.data(), static_cast<Eigen::Index>(layer.out_channels),
                   static_cast<Eigen::Index>(g.rows()));
  ConstMapMat<T> patches(cols.data(), static_cast<Eigen::Index>(g.rows()),
                         static_cast<Eigen::Index>(g.cols()));
  for (std::size_t n = 0; n < input.n(); ++n) {
    im2col(input.item(n).data(), g, cols.data());
    MapMat<T> y(out.item(n).data(), static_cast<Eigen::Index>(layer.out_channels),
                static_cast<Eigen::Index>(g.cols()));
    y.noalias() = w * patches;
    if (layer.has_bias()) {
      for (std::size_t i = 0; i < layer.out_channels; ++i) {
        y.row(static_cast<Eigen::Index>(i)).array() += layer.bias[i];
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const DenseConvLayer<T>& layer,
                             const Tensor4<T>& grad_out, bool need_input_grad) {
  const Geometry g = geometry_for(input, layer);
  const Shape4 expected{input.n(), layer.out_channels, g.out_h, g.out_w};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " != forward output shape " + to_string(expected));
  }
  ConvGrads<T> grads;
  grads.weights.assign(layer.weights.size(), T{0});
  if (layer.has_bias()) grads.bias.assign(layer.out_channels, T{0});
  if (need_input_grad) grads.input = Tensor4<T>(input.shape());

  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto ncols = static_cast<Eigen::Index>(g.cols());
  const auto nout = static_cast<Eigen::Index>(layer.out_channels);
  std::vector<T> cols(g.rows() * g.cols());
  std::vector<T> grad_cols(need_input_grad ? cols.size() : 0);
  ConstMapMat<T> w(layer.weights.data(), nout, rows);
  MapMat<T> gw(grads.weights.data(), nout, rows);
  ConstMapMat<T> patches(cols.data(), rows, ncols);

  for (std::size_t n = 0; n < input.n(); ++n) {
    ConstMapMat<T> gy(grad_out.item(n).data(), nout, ncols);
    im2col(input.item(n).data(), g, cols.data());
    gw.noalias() += gy * patches.transpose();
    if (layer.has_bias()) {
      for (Eigen::Index i = 0; i < nout; ++i)
        grads.bias[static_cast<std::size_t>(i)] += gy.row(i).sum();
    }
    if (need_input_grad) {
      MapMat<T> gc(grad_cols.data(), rows, ncols);
      gc.noalias() = w.transpose() * gy;
      col2im_add(grad_cols.data(), g, grads.input.item(n).data());
    }
  }
  return grads;
}

template struct DenseConvLayer<float>;
template struct DenseConvLayer<double>;
template Tensor4<float> conv2d_forward(const Tensor4<float>&, const DenseConvLayer<float>&);
template Tensor4<double> conv2d_forward(const Tensor4<double>&, const DenseConvLayer<double>&);
template ConvGrads<float> conv2d_backward(const Tensor4<float>&, const DenseConvLayer<float>&,
                                          const Tensor4<float>&, bool);
template ConvGrads<double> conv2d_backward(const Tensor4<double>&, const DenseConvLayer<double>&,
                                           const Tensor4<double>&, bool);

}  // namespace rotconv::nn
