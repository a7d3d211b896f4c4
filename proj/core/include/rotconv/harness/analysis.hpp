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

#ifndef ROTCONV_HARNESS_ANALYSIS_HPP
#define ROTCONV_HARNESS_ANALYSIS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "rotconv/harness/datasets.hpp"
#include "rotconv/harness/trainer.hpp"
#include "rotconv/io/model.hpp"
#include "rotconv/rotate/rotate_conv.hpp"

namespace rotconv::harness {

enum class AngleAxis : std::uint8_t {
  kInputChannels,   // fixed output filter i, angles over j
  kOutputChannels,  // fixed input channel j, angles over i
};

std::optional<AngleAxis> parse_axis(std::string_view name);

struct Histogram {
  std::vector<double> edges;  // bins + 1 uniform edges over [0, 180)
  std::vector<std::size_t> counts;
};

/// Histogram of one row or column of a layer's angles. Per-filter layers
/// only support kOutputChannels (one angle per filter); the other axis
/// throws std::invalid_argument, as do a zero bin count and an out-of-range
/// index.
Histogram angle_histogram(const rotate::RotateLayer<float>& layer, AngleAxis axis,
                          std::size_t index, std::size_t bins);

/// Header "bin_lo,bin_hi,count".
void write_histogram_csv(std::ostream& out, const Histogram& histogram);

enum class SweepOrder : std::uint8_t { kBottomUp, kTopDown };

std::optional<SweepOrder> parse_order(std::string_view name);

struct SweepConfig {
  SweepOrder order = SweepOrder::kBottomUp;
  std::size_t steps = 0;  // clamped to the prunable layer count
  PruneMethod method = PruneMethod::kAi;
  TrainConfig finetune;  // lr defaults to 0.001 via make_sweep_config
};

SweepConfig make_sweep_config(SweepOrder order, std::size_t steps, PruneMethod method,
                              std::size_t finetune_epochs);

struct SweepRow {
  std::size_t pruned_layers = 0;
  std::vector<std::size_t> layers;  // conv indices pruned in this row
  double accuracy = 0.0;
};

/// Row s prunes the first s prunable layers in `order` (conv indices 1..),
/// starting from `base` each time, fine-tunes and evaluates. Row 0 is the
/// base model's accuracy without fine-tuning. Needs at least two prunable
/// layers.
std::vector<SweepRow> layer_sweep(const io::Model& base, const Dataset& train_set,
                                  const Dataset& test_set, const SweepConfig& cfg);

/// Header "pruned_layers,layers,accuracy"; layers are ';'-separated.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace rotconv::harness

#endif  // ROTCONV_HARNESS_ANALYSIS_HPP
