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

#ifndef ROTCONV_NN_TENSOR_HPP
#define ROTCONV_NN_TENSOR_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rotconv {

/// Thrown when operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or Inf crosses a checked boundary.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#if defined(ROTCONV_DEBUG_CHECKS)
inline constexpr bool kDebugChecks = true;
#else
inline constexpr bool kDebugChecks = false;
#endif

namespace nn {

struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  [[nodiscard]] constexpr std::size_t count() const { return n * c * h * w; }
  [[nodiscard]] constexpr std::size_t plane() const { return h * w; }
  [[nodiscard]] constexpr std::size_t item() const { return c * h * w; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

/// Dense NCHW tensor. Storage is always contiguous and exactly
/// n*c*h*w elements long.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{0});
  Tensor4(Shape4 shape, std::vector<T> data);

  [[nodiscard]] const Shape4& shape() const { return shape_; }
  [[nodiscard]] std::size_t n() const { return shape_.n; }
  [[nodiscard]] std::size_t c() const { return shape_.c; }
  [[nodiscard]] std::size_t h() const { return shape_.h; }
  [[nodiscard]] std::size_t w() const { return shape_.w; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::size_t index(std::size_t n, std::size_t c, std::size_t h,
                                  std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<T> span() { return data_; }
  [[nodiscard]] std::span<const T> span() const { return data_; }
  /// View of sample `n` (c*h*w contiguous values).
  [[nodiscard]] std::span<T> item(std::size_t n) {
    return std::span<T>(data_).subspan(n * shape_.item(), shape_.item());
  }
  [[nodiscard]] std::span<const T> item(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * shape_.item(), shape_.item());
  }
  [[nodiscard]] T* data() { return data_.data(); }
  [[nodiscard]] const T* data() const { return data_.data(); }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }

  void fill(T value);
  /// Same storage, new dims; the element count must be unchanged.
  void reshape(Shape4 shape);

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

/// Throws NonFiniteError naming `where` if any value is NaN or Inf.
template <typename T>
void require_finite(std::span<const T> values, const char* where);

template <typename T>
inline void debug_require_finite(std::span<const T> values, const char* where) {
  if constexpr (kDebugChecks) require_finite(values, where);
}

template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return Tensor4<To>(t.shape(), std::move(out));
}

extern template class Tensor4<float>;
extern template class Tensor4<double>;

}  // namespace nn
}  // namespace rotconv

#endif  // ROTCONV_NN_TENSOR_HPP
