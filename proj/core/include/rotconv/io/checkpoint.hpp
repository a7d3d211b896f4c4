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

#ifndef ROTCONV_IO_CHECKPOINT_HPP
#define ROTCONV_IO_CHECKPOINT_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rotconv/io/model.hpp"

namespace rotconv::io {

// Byte layout, all integers little-endian, all reals IEEE-754 binary32:
//
//   "RCNVCKPT" | version u16 | record count u16 | records...
//
// Each record is a tag byte followed by its payload.
//   0 dense conv    N u16, M u16, kh u8, kw u8, stride u8, pad u8, has_bias u8,
//                   W (N*M*kh*kw), bias (N if has_bias)
//   1/2 rotate      N u16, M u16, stride u8, pad u8, W (N*M*3), angles (N*M or N)
//   3 ai-pruned     N u16, M u16, stride u8, pad u8, n_alive u32, w_min, tau, k u8,
//                   per alive kernel: i u16, j u16, k cell bytes, k ranks
//                   (ranks 1, 2 or 4 bytes wide, the least that holds n-1)
//   4 batchnorm     C u16, eps, momentum, gamma, beta, running mean, running var
//   5 linear        out u32, in u32, has_bias u8, W (out*in), bias (out if has_bias)
//
// A pruned layer with fewer than two reserved weights is written with
// n_alive = 0, w_min = 0, tau = 0 and restores to all zeros.

inline constexpr std::array<char, 8> kCheckpointMagic = {'R', 'C', 'N', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 12;

enum class CheckpointErrc {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kTrailingBytes,
  kUnknownTag,
  kBadDims,
  kBadValue,
  kBadCell,
  kDuplicateCell,
  kRankOutOfRange,
  kDuplicateRank,
  kBadKernelIndex,
  kUnsupportedLayer,
  kIo,
};

std::string_view errc_name(CheckpointErrc code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  [[nodiscard]] CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

std::vector<std::uint8_t> export_checkpoint(const Model& model);
Model import_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Model& model);
Model read_checkpoint(const std::filesystem::path& path);

/// Payload bytes of a pruned-layer record (tag byte excluded).
std::size_t ai_payload_bytes(std::size_t n_alive, unsigned k);

}  // namespace rotconv::io

#endif  // ROTCONV_IO_CHECKPOINT_HPP
