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

#include "rotconv/harness/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace rotconv::harness {

std::optional<AngleAxis> parse_axis(std::string_view name) {
  if (name == "input" || name == "input_channels") return AngleAxis::kInputChannels;
  if (name == "output" || name == "output_channels") return AngleAxis::kOutputChannels;
  return std::nullopt;
}

Histogram angle_histogram(const rotate::RotateLayer<float>& layer, AngleAxis axis,
                          std::size_t index, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<float> values;
  if (axis == AngleAxis::kInputChannels) {
    if (layer.sharing == rotate::AngleSharing::kPerFilter) {
      throw std::invalid_argument(
          "per-filter layers hold one angle per filter; use the output_channels axis");
    }
    if (index >= layer.out_channels) {
      throw std::invalid_argument("output filter " + std::to_string(index) + " out of range");
    }
    for (std::size_t j = 0; j < layer.in_channels; ++j) values.push_back(layer.angle(index, j));
  } else {
    if (index >= layer.in_channels) {
      throw std::invalid_argument("input channel " + std::to_string(index) + " out of range");
    }
    for (std::size_t i = 0; i < layer.out_channels; ++i) values.push_back(layer.angle(i, index));
  }
  Histogram h;
  const double width = rotate::kHalfTurnDegrees / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(width * static_cast<double>(b));
  h.counts.assign(bins, 0);
  for (float v : values) {
    const auto b = static_cast<std::size_t>(static_cast<double>(v) / width);
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram) {
  out << "bin_lo,bin_hi,count\n";
  char buf[96];
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%g,%g,%zu\n", histogram.edges[b], histogram.edges[b + 1],
                  histogram.counts[b]);
    out << buf;
  }
}

std::optional<SweepOrder> parse_order(std::string_view name) {
  if (name == "bottom_up") return SweepOrder::kBottomUp;
  if (name == "top_down") return SweepOrder::kTopDown;
  return std::nullopt;
}

SweepConfig make_sweep_config(SweepOrder order, std::size_t steps, PruneMethod method,
                              std::size_t finetune_epochs) {
  SweepConfig cfg;
  cfg.order = order;
  cfg.steps = steps;
  cfg.method = method;
  cfg.finetune.epochs = finetune_epochs;
  cfg.finetune.lr = 0.001;
  return cfg;
}

std::vector<SweepRow> layer_sweep(const io::Model& base, const Dataset& train_set,
                                  const Dataset& test_set, const SweepConfig& cfg) {
  const std::size_t convs = io::conv_records(base).size();
  std::vector<std::size_t> prunable;
  for (std::size_t c = 1; c < convs; ++c) prunable.push_back(c);
  if (prunable.size() < 2) {
    throw std::invalid_argument("layer sweep needs at least two prunable layers");
  }
  if (cfg.order == SweepOrder::kTopDown) std::reverse(prunable.begin(), prunable.end());
  const std::size_t steps = std::min(cfg.steps, prunable.size());

  std::vector<SweepRow> rows;
  rows.push_back({0, {}, evaluate(base, test_set)});
  for (std::size_t s = 1; s <= steps; ++s) {
    SweepRow row;
    row.pruned_layers = s;
    row.layers.assign(prunable.begin(), prunable.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(row.layers.begin(), row.layers.end());
    TrainConfig ft = cfg.finetune;
    ft.method = cfg.method;
    ft.layers = row.layers;
    io::Model model = base;
    prepare_model(model, ft);
    train(model, train_set, nullptr, ft);
    row.accuracy = evaluate(model, test_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "pruned_layers,layers,accuracy\n";
  char buf[32];
  for (const SweepRow& r : rows) {
    out << r.pruned_layers << ',';
    for (std::size_t i = 0; i < r.layers.size(); ++i) out << (i ? ";" : "") << r.layers[i];
    std::snprintf(buf, sizeof buf, ",%.6f\n", r.accuracy);
    out << buf;
  }
}

}  // namespace rotconv::harness
