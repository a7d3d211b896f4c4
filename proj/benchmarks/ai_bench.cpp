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

#include "rotconv/ai/ai_prune.hpp"
#include "rotconv/nn/random.hpp"

namespace {

using namespace rotconv;

nn::DenseConvLayer<float> random_layer(std::size_t n, std::size_t m, nn::Rng& rng) {
  auto l = nn::DenseConvLayer<float>::zeros(n, m);
  for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-0.3, 0.3));
  return l;
}

// Args: output channels, input channels, k. The layer is re-randomized
// outside the timed region so every step selects from scratch.
void BM_AiPruneStep(benchmark::State& state) {
  nn::Rng rng(1);
  const auto base = random_layer(static_cast<std::size_t>(state.range(0)),
                                 static_cast<std::size_t>(state.range(1)), rng);
  ai::AiPruneConfig cfg;
  cfg.k = static_cast<unsigned>(state.range(2));
  for (auto _ : state) {
    state.PauseTiming();
    auto layer = base;
    state.ResumeTiming();
    benchmark::DoNotOptimize(ai::ai_prune_step(layer, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_AiPruneStep)
    ->Args({32, 16, 3})
    ->Args({32, 32, 3})
    ->Args({160, 160, 3})
    ->Args({160, 160, 9});

void BM_Reproject(benchmark::State& state) {
  nn::Rng rng(2);
  auto layer = random_layer(static_cast<std::size_t>(state.range(0)),
                            static_cast<std::size_t>(state.range(1)), rng);
  const auto positions = ai::ai_prune_step(layer, {});
  for (auto _ : state) benchmark::DoNotOptimize(ai::reproject(layer, positions));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_Reproject)->Args({32, 16})->Args({160, 160});

}  // namespace
