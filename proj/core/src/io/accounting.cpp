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

#include "rotconv/io/accounting.hpp"

#include <cmath>
#include <cstdio>
#include <variant>

namespace rotconv::io {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double reduction(std::size_t kept, std::size_t full) {
  if (full == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(kept) / static_cast<double>(full));
}

// Cells a rotated kernel touches: 3 on the 45-degree grid, 5 between.
std::size_t rotate_support(float angle) {
  return std::fmod(static_cast<double>(angle), rotate::kSectorDegrees) == 0.0 ? 3 : 5;
}

std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

}  // namespace

double Counts::param_reduction_pct() const { return reduction(stored_reals, dense_params); }
double Counts::mac_reduction_pct() const { return reduction(macs_nonzero, macs_dense); }

Counts& Counts::operator+=(const Counts& other) {
  stored_reals += other.stored_reals;
  stored_indices += other.stored_indices;
  dense_params += other.dense_params;
  macs_nonzero += other.macs_nonzero;
  macs_dense += other.macs_dense;
  return *this;
}

Counts parameter_counts(const Layer<float>& layer) {
  Counts c;
  std::visit(Overloaded{
                 [&](const nn::DenseConvLayer<float>& l) {
                   c.stored_reals = l.weights.size() + l.bias.size();
                   c.dense_params = c.stored_reals;
                 },
                 [&](const rotate::RotateLayer<float>& l) {
                   c.stored_reals = l.parameter_count();
                   c.dense_params = l.kernel_count() * ai::kKernelCells;
                 },
                 [&](const AiConvLayer<float>& l) {
                   c.stored_reals = 2;
                   c.stored_indices = 2 * l.state.point_count();
                   c.dense_params = l.dense.weights.size() + l.dense.bias.size();
                 },
                 [&](const nn::BatchNormLayer<float>& l) {
                   c.stored_reals = 4 * l.channels;
                   c.dense_params = c.stored_reals;
                 },
                 [&](const nn::LinearLayer<float>& l) {
                   c.stored_reals = l.weights.size() + l.bias.size();
                   c.dense_params = c.stored_reals;
                 },
             },
             layer);
  return c;
}

AccountReport account(const Model& model,
                      const std::vector<std::pair<std::size_t, std::size_t>>& extents) {
  if (extents.size() != model.layers.size()) {
    throw ModelError("one input extent per record is required");
  }
  AccountReport report;
  for (std::size_t r = 0; r < model.layers.size(); ++r) {
    const auto [h, w] = extents[r];
    LayerAccount la;
    la.record = r;
    la.tag = tag_of(model.layers[r]);
    la.counts = parameter_counts(model.layers[r]);
    Counts& c = la.counts;
    std::visit(Overloaded{
                   [&](const nn::DenseConvLayer<float>& l) {
                     const std::size_t pixels = nn::conv_out_dim(h, l.kernel_h, l.stride, l.pad) *
                                                nn::conv_out_dim(w, l.kernel_w, l.stride, l.pad);
                     std::size_t nonzero = 0;
                     for (float v : l.weights) nonzero += v != 0.0F ? 1 : 0;
                     c.macs_dense = pixels * l.weights.size();
                     c.macs_nonzero = pixels * nonzero;
                   },
                   [&](const rotate::RotateLayer<float>& l) {
                     const std::size_t pixels = nn::conv_out_dim(h, 3, l.stride, l.pad) *
                                                nn::conv_out_dim(w, 3, l.stride, l.pad);
                     std::size_t support = 0;
                     for (std::size_t i = 0; i < l.out_channels; ++i) {
                       for (std::size_t j = 0; j < l.in_channels; ++j) {
                         support += rotate_support(l.angle(i, j));
                       }
                     }
                     c.macs_dense = pixels * l.kernel_count() * ai::kKernelCells;
                     c.macs_nonzero = pixels * support;
                   },
                   [&](const AiConvLayer<float>& l) {
                     const std::size_t pixels =
                         nn::conv_out_dim(h, 3, l.dense.stride, l.dense.pad) *
                         nn::conv_out_dim(w, 3, l.dense.stride, l.dense.pad);
                     c.macs_dense = pixels * l.dense.weights.size();
                     c.macs_nonzero = pixels * l.state.point_count();
                   },
                   [&](const nn::BatchNormLayer<float>&) {},
                   [&](const nn::LinearLayer<float>& l) {
                     c.macs_dense = l.weights.size();
                     c.macs_nonzero = l.weights.size();
                   },
               },
               model.layers[r]);
    report.total += c;
    report.layers.push_back(la);
  }
  return report;
}

AccountReport account(const Model& model, std::size_t height, std::size_t width) {
  const Topology topo = infer_topology(model);
  return account(model, record_input_extents(model, topo, height, width));
}

void write_report_csv(std::ostream& out, const AccountReport& report) {
  out << "record,tag,stored_reals,stored_indices,dense_params,macs_nonzero,macs_dense,"
         "param_reduction_pct,mac_reduction_pct\n";
  auto row = [&](const std::string& record, std::string_view tag, const Counts& c) {
    out << record << ',' << tag << ',' << c.stored_reals << ',' << c.stored_indices << ','
        << c.dense_params << ',' << c.macs_nonzero << ',' << c.macs_dense << ','
        << format("%.2f", c.param_reduction_pct()) << ',' << format("%.2f", c.mac_reduction_pct())
        << '\n';
  };
  for (const LayerAccount& la : report.layers) {
    row(std::to_string(la.record), tag_name(la.tag), la.counts);
  }
  row("total", "", report.total);
}

std::vector<std::string> inspect_lines(const Model& model) {
  std::vector<std::string> lines;
  for (std::size_t r = 0; r < model.layers.size(); ++r) {
    const Layer<float>& layer = model.layers[r];
    std::string dims = std::visit(
        Overloaded{
            [](const nn::DenseConvLayer<float>& l) {
              return format("out=%zu in=%zu kernel=%zux%zu stride=%zu pad=%zu bias=%d",
                            l.out_channels, l.in_channels, l.kernel_h, l.kernel_w, l.stride, l.pad,
                            l.has_bias() ? 1 : 0);
            },
            [](const rotate::RotateLayer<float>& l) {
              return format("out=%zu in=%zu stride=%zu pad=%zu angles=%zu", l.out_channels,
                            l.in_channels, l.stride, l.pad, l.angles.size());
            },
            [](const AiConvLayer<float>& l) {
              return format("out=%zu in=%zu stride=%zu pad=%zu k=%u alive=%zu w_min=%.9g tau=%.9g",
                            l.dense.out_channels, l.dense.in_channels, l.dense.stride, l.dense.pad,
                            l.state.k, l.state.alive_count(), l.state.w_min, l.state.tau);
            },
            [](const nn::BatchNormLayer<float>& l) {
              return format("channels=%zu eps=%.9g momentum=%.9g", l.channels, l.eps, l.momentum);
            },
            [](const nn::LinearLayer<float>& l) {
              return format("out=%zu in=%zu bias=%d", l.out_features, l.in_features,
                            l.bias.empty() ? 0 : 1);
            },
        },
        layer);
    const Counts c = parameter_counts(layer);
    lines.push_back(std::to_string(r) + ' ' + std::string(tag_name(tag_of(layer))) + ' ' + dims +
                    " stored_reals=" + std::to_string(c.stored_reals) +
                    " stored_indices=" + std::to_string(c.stored_indices));
  }
  return lines;
}

}  // namespace rotconv::io
