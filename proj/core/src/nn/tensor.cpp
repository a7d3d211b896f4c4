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

#include "rotconv/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rotconv::nn {

std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << '(' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ')';
  return os.str();
}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, T fill) : shape_(shape), data_(shape.count(), fill) {}

template <typename T>
Tensor4<T>::Tensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.count()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

template <typename T>
void Tensor4<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void Tensor4<T>::reshape(Shape4 shape) {
  if (shape.count() != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  shape_ = shape;
}

template <typename T>
void require_finite(std::span<const T> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError(std::string("non-finite value at ") + where + " (index " +
                           std::to_string(i) + ")");
    }
  }
}

template class Tensor4<float>;
template class Tensor4<double>;
template void require_finite<float>(std::span<const float>, const char*);
template void require_finite<double>(std::span<const double>, const char*);

}  // namespace rotconv::nn
