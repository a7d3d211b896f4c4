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

#include <benchmark/benchmark.h>

#include "rotconv/nn/conv.hpp"
#include "rotconv/nn/random.hpp"

namespace {

using namespace rotconv;

nn::Tensor4<float> random_input(nn::Shape4 shape, nn::Rng& rng) {
  nn::Tensor4<float> t(shape);
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

nn::DenseConvLayer<float> random_layer(std::size_t n, std::size_t m, nn::Rng& rng) {
  auto l = nn::DenseConvLayer<float>::zeros(n, m);
  for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-0.3, 0.3));
  return l;
}

// Args: output channels, input channels, spatial side. Batch of 32.
void BM_ConvForward(benchmark::State& state) {
  nn::Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  const auto layer = random_layer(n, m, rng);
  const auto x = random_input(nn::Shape4{32, m, side, side}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, layer));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ConvForward)->Args({16, 1, 28})->Args({32, 16, 14})->Args({32, 32, 7});

void BM_ConvBackward(benchmark::State& state) {
  nn::Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  const auto layer = random_layer(n, m, rng);
  const auto x = random_input(nn::Shape4{32, m, side, side}, rng);
  const auto g = random_input(nn::Shape4{32, n, side, side}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, layer, g));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ConvBackward)->Args({16, 1, 28})->Args({32, 16, 14})->Args({32, 32, 7});

}  // namespace
