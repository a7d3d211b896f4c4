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

#include "rotconv/nn/random.hpp"
#include "rotconv/rotate/rotate_conv.hpp"

namespace {

using namespace rotconv;

nn::Tensor4<float> random_input(nn::Shape4 shape, nn::Rng& rng) {
  nn::Tensor4<float> t(shape);
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

rotate::RotateLayer<float> random_layer(std::size_t n, std::size_t m, rotate::AngleSharing sharing,
                                        nn::Rng& rng) {
  auto l = rotate::RotateLayer<float>::zeros(n, m, sharing);
  for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-0.3, 0.3));
  rotate::init_angles(l, {}, rng.next());
  return l;
}

rotate::AngleSharing sharing_arg(std::int64_t v) {
  return v == 0 ? rotate::AngleSharing::kPerKernel : rotate::AngleSharing::kPerFilter;
}

// Args: output channels, input channels, spatial side, sharing (0 kernel, 1 filter).
void BM_RotateForward(benchmark::State& state) {
  nn::Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  const auto layer = random_layer(n, m, sharing_arg(state.range(3)), rng);
  const auto x = random_input(nn::Shape4{32, m, side, side}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rotate::rotate_forward(x, layer));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_RotateForward)->Args({32, 16, 14, 0})->Args({32, 16, 14, 1})->Args({32, 32, 7, 0});

void BM_RotateBackward(benchmark::State& state) {
  nn::Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  const auto layer = random_layer(n, m, sharing_arg(state.range(3)), rng);
  const auto x = random_input(nn::Shape4{32, m, side, side}, rng);
  const auto g = random_input(nn::Shape4{32, n, side, side}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rotate::rotate_backward(x, layer, g));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_RotateBackward)->Args({32, 16, 14, 0})->Args({32, 16, 14, 1})->Args({32, 32, 7, 0});

void BM_Materialize(benchmark::State& state) {
  nn::Rng rng(3);
  const auto layer =
      random_layer(static_cast<std::size_t>(state.range(0)),
                   static_cast<std::size_t>(state.range(1)), rotate::AngleSharing::kPerKernel, rng);
  nn::DenseConvLayer<float> out;
  for (auto _ : state) {
    rotate::materialize_into(layer, out);
    benchmark::DoNotOptimize(out.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_Materialize)->Args({32, 16})->Args({160, 160});

void BM_AngleStep(benchmark::State& state) {
  nn::Rng rng(4);
  const rotate::RotateConfig cfg;
  std::vector<double> last(1024);
  std::vector<double> delta(1024);
  for (std::size_t i = 0; i < last.size(); ++i) {
    last[i] = rng.uniform(0.0, 180.0);
    delta[i] = rng.uniform(-10.0, 10.0);
  }
  for (auto _ : state) {
    for (std::size_t i = 0; i < last.size(); ++i) {
      benchmark::DoNotOptimize(rotate::angle_step(last[i], delta[i], cfg));
    }
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_AngleStep);

}  // namespace
