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

#ifndef ROTCONV_HARNESS_DATASETS_HPP
#define ROTCONV_HARNESS_DATASETS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotconv/nn/tensor.hpp"

namespace rotconv::harness {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  nn::Tensor4<float> images;
  std::vector<std::int32_t> labels;
  std::size_t num_classes = 0;
  std::string split;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  /// Labels within [0, num_classes) and one per image.
  void validate() const;
};

/// Per-channel mean and standard deviation of pixel values scaled to [0, 1].
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

ChannelStats mnist_stats();
ChannelStats cifar10_stats();

/// Statistics of `images` over samples and positions.
ChannelStats channel_stats(const nn::Tensor4<float>& images);

/// x <- (x - mean[c]) / stddev[c].
void normalize(nn::Tensor4<float>& images, const ChannelStats& stats);

struct LoadOptions {
  std::optional<std::size_t> limit;   // keep the first `limit` samples
  std::optional<ChannelStats> stats;  // default: the dataset's standard constants
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kIdxImageHeaderBytes = 16;
inline constexpr std::size_t kIdxLabelHeaderBytes = 8;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

/// IDX image/label pair (MNIST layout), 10 classes.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const LoadOptions& options = {});

/// One CIFAR-10 binary batch: records of a label byte and 3x32x32 CHW pixels.
Dataset load_cifar10_bin(const std::filesystem::path& path, const LoadOptions& options = {});

inline constexpr std::size_t kSynthSide = 16;

/// `n` 16x16 images each holding one anti-aliased line segment at a uniform
/// random angle; the label is the nearest of `num_buckets` evenly spaced
/// orientations starting at 0 degrees. Normalized with `stats`, or with the
/// set's own statistics when none are given.
Dataset synth_angles(std::uint64_t seed, std::size_t n, std::size_t num_buckets,
                     const std::optional<ChannelStats>& stats = std::nullopt);

/// Line angle (degrees, [0, 180)) behind each synth_angles sample, same seed.
std::vector<double> synth_angles_truth(std::uint64_t seed, std::size_t n);

/// First `count` samples.
Dataset take(const Dataset& data, std::size_t count);

}  // namespace rotconv::harness

#endif  // ROTCONV_HARNESS_DATASETS_HPP
