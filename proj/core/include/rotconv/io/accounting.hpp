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

#ifndef ROTCONV_IO_ACCOUNTING_HPP
#define ROTCONV_IO_ACCOUNTING_HPP

#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rotconv/io/model.hpp"

namespace rotconv::io {

/// Parameter and multiply-accumulate counts for one record or a whole model.
/// MACs are per sample.
struct Counts {
  std::size_t stored_reals = 0;
  std::size_t stored_indices = 0;
  std::size_t dense_params = 0;  // the same layer as an unpruned 3x3 bank
  std::size_t macs_nonzero = 0;
  std::size_t macs_dense = 0;

  /// 1 - stored_reals / dense_params, as a percentage (0 when dense_params is 0).
  [[nodiscard]] double param_reduction_pct() const;
  [[nodiscard]] double mac_reduction_pct() const;
  Counts& operator+=(const Counts& other);
};

struct LayerAccount {
  std::size_t record = 0;
  LayerTag tag = LayerTag::kDenseConv;
  Counts counts;
};

struct AccountReport {
  std::vector<LayerAccount> layers;
  Counts total;
};

/// Stored-parameter fields only; MAC fields are left zero.
Counts parameter_counts(const Layer<float>& layer);

/// `extents` holds the (h, w) at the input of every record.
AccountReport account(const Model& model,
                      const std::vector<std::pair<std::size_t, std::size_t>>& extents);

/// Infers the architecture and propagates a height x width sample through it.
AccountReport account(const Model& model, std::size_t height, std::size_t width);

/// CSV with one row per record and a final "total" row.
void write_report_csv(std::ostream& out, const AccountReport& report);

/// One line per record: index, tag, dims and stored parameters.
std::vector<std::string> inspect_lines(const Model& model);

}  // namespace rotconv::io

#endif  // ROTCONV_IO_ACCOUNTING_HPP
