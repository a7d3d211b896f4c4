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

#include "rotconv/harness/network.hpp"
#include "rotconv/io/checkpoint.hpp"

namespace {

using namespace rotconv;

// Arg: method (0 dense, 1 rotate4, 2 rotate3, 3 ai) on tiny3's prunable convolutions.
io::Model model_for(std::int64_t method) {
  static const harness::PruneMethod methods[] = {
      harness::PruneMethod::kNone, harness::PruneMethod::kRotate4, harness::PruneMethod::kRotate3,
      harness::PruneMethod::kAi};
  io::Model m = harness::build_network(io::Arch::kTiny3, 1, 28, 28, 10, 1).model;
  harness::apply_method(m, methods[method], {1, 2}, {});
  return m;
}

void BM_Export(benchmark::State& state) {
  const io::Model m = model_for(state.range(0));
  std::size_t bytes = 0;
  for (auto _ : state) {
    const auto b = io::export_checkpoint(m);
    bytes = b.size();
    benchmark::DoNotOptimize(b.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
  state.counters["bytes"] = static_cast<double>(bytes);
}
BENCHMARK(BM_Export)->DenseRange(0, 3);

void BM_Import(benchmark::State& state) {
  const auto bytes = io::export_checkpoint(model_for(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(io::import_checkpoint(bytes));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_Import)->DenseRange(0, 3);

}  // namespace
