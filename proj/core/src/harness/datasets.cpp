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

#include "rotconv/harness/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "rotconv/nn/random.hpp"

namespace rotconv::harness {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void finish(Dataset& data, const LoadOptions& options, const ChannelStats& standard) {
  normalize(data.images, options.stats ? *options.stats : standard);
  data.validate();
}

struct SynthSample {
  double angle;
  std::vector<float> pixels;
};

// Distance from (px, py) to the segment a-b.
double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = px - (ax + t * dx);
  const double ey = py - (ay + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

std::vector<SynthSample> synth_samples(std::uint64_t seed, std::size_t n) {
  nn::Rng rng(seed);
  std::vector<SynthSample> out(n);
  constexpr double kPi = 3.14159265358979323846;
  const double mid = (static_cast<double>(kSynthSide) - 1.0) / 2.0;
  for (auto& s : out) {
    s.angle = rng.uniform(0.0, 180.0);
    const double cx = mid + rng.uniform(-1.5, 1.5);
    const double cy = mid + rng.uniform(-1.5, 1.5);
    const double half = rng.uniform(4.0, 7.0);
    // Rows grow downward, so counterclockwise angles move toward row 0.
    const double ux = std::cos(s.angle * kPi / 180.0);
    const double uy = -std::sin(s.angle * kPi / 180.0);
    const double ax = cx - half * ux;
    const double ay = cy - half * uy;
    const double bx = cx + half * ux;
    const double by = cy + half * uy;
    s.pixels.resize(kSynthSide * kSynthSide);
    for (std::size_t r = 0; r < kSynthSide; ++r) {
      for (std::size_t c = 0; c < kSynthSide; ++c) {
        const double d =
            segment_distance(static_cast<double>(c), static_cast<double>(r), ax, ay, bx, by);
        s.pixels[r * kSynthSide + c] = static_cast<float>(std::clamp(1.5 - d, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (images.n() != labels.size()) {
    throw DataError(std::to_string(images.n()) + " images but " + std::to_string(labels.size()) +
                    " labels");
  }
  for (std::int32_t l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) +
                      ")");
    }
  }
}

ChannelStats mnist_stats() { return {{0.1307}, {0.3081}}; }

ChannelStats cifar10_stats() { return {{0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}}; }

ChannelStats channel_stats(const nn::Tensor4<float>& images) {
  const std::size_t c = images.c();
  const std::size_t plane = images.h() * images.w();
  ChannelStats s;
  s.mean.assign(c, 0.0);
  s.stddev.assign(c, 0.0);
  const double count = static_cast<double>(images.n() * plane);
  if (count == 0.0) return s;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t n = 0; n < images.n(); ++n) {
      const float* p = images.data() + (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < images.n(); ++n) {
      const float* p = images.data() + (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
    }
    s.mean[ch] = mean;
    s.stddev[ch] = std::sqrt(sq / count);
  }
  return s;
}

void normalize(nn::Tensor4<float>& images, const ChannelStats& stats) {
  const std::size_t c = images.c();
  if (stats.mean.size() != c || stats.stddev.size() != c) {
    throw DataError("normalization statistics have " + std::to_string(stats.mean.size()) +
                    " channels, images have " + std::to_string(c));
  }
  const std::size_t plane = images.h() * images.w();
  for (std::size_t n = 0; n < images.n(); ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double sd = stats.stddev[ch] > 0.0 ? stats.stddev[ch] : 1.0;
      float* p = images.data() + (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        p[i] = static_cast<float>((p[i] - stats.mean[ch]) / sd);
      }
    }
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const LoadOptions& options) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  if (ib.size() < kIdxImageHeaderBytes) throw DataError(images.string() + ": truncated header");
  if (lb.size() < kIdxLabelHeaderBytes) throw DataError(labels.string() + ": truncated header");
  if (be32(ib, 0) != kIdxImageMagic) {
    throw DataError(images.string() + ": magic " + hex(be32(ib, 0)) + ", expected " +
                    hex(kIdxImageMagic));
  }
  if (be32(lb, 0) != kIdxLabelMagic) {
    throw DataError(labels.string() + ": magic " + hex(be32(lb, 0)) + ", expected " +
                    hex(kIdxLabelMagic));
  }
  const std::size_t count = be32(ib, 4);
  const std::size_t rows = be32(ib, 8);
  const std::size_t cols = be32(ib, 12);
  const std::size_t label_count = be32(lb, 4);
  if (count != label_count) {
    throw DataError("image count " + std::to_string(count) + " does not match label count " +
                    std::to_string(label_count));
  }
  if (ib.size() != kIdxImageHeaderBytes + count * rows * cols) {
    throw DataError(images.string() + ": length does not match its header");
  }
  if (lb.size() != kIdxLabelHeaderBytes + count) {
    throw DataError(labels.string() + ": length does not match its header");
  }
  const std::size_t n = std::min(count, options.limit.value_or(count));
  Dataset data;
  data.num_classes = 10;
  data.split = images.filename().string();
  data.images = nn::Tensor4<float>(nn::Shape4{n, 1, rows, cols});
  float* dst = data.images.data();
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    dst[i] = static_cast<float>(ib[kIdxImageHeaderBytes + i]) / 255.0F;
  }
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = lb[kIdxLabelHeaderBytes + i];
  finish(data, options, mnist_stats());
  return data;
}

Dataset load_cifar10_bin(const std::filesystem::path& path, const LoadOptions& options) {
  const auto bytes = read_file(path);
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(path.string() + ": length " + std::to_string(bytes.size()) +
                    " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  const std::size_t n = std::min(count, options.limit.value_or(count));
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  Dataset data;
  data.num_classes = 10;
  data.split = path.filename().string();
  data.images = nn::Tensor4<float>(nn::Shape4{n, 3, 32, 32});
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kCifarRecordBytes;
    data.labels[i] = rec[0];
    float* dst = data.images.data() + i * kPixels;
    for (std::size_t p = 0; p < kPixels; ++p) dst[p] = static_cast<float>(rec[1 + p]) / 255.0F;
  }
  finish(data, options, cifar10_stats());
  return data;
}

Dataset synth_angles(std::uint64_t seed, std::size_t n, std::size_t num_buckets,
                     const std::optional<ChannelStats>& stats) {
  if (num_buckets == 0 || 180 % num_buckets != 0) {
    throw DataError("bucket count " + std::to_string(num_buckets) + " does not divide 180");
  }
  const double width = 180.0 / static_cast<double>(num_buckets);
  const auto samples = synth_samples(seed, n);
  Dataset data;
  data.num_classes = num_buckets;
  data.split = "synth_angles";
  data.images = nn::Tensor4<float>(nn::Shape4{n, 1, kSynthSide, kSynthSide});
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(samples[i].pixels.begin(), samples[i].pixels.end(), data.images.item(i).begin());
    const auto bucket = static_cast<std::size_t>(std::floor(samples[i].angle / width + 0.5));
    data.labels[i] = static_cast<std::int32_t>(bucket % num_buckets);
  }
  normalize(data.images, stats ? *stats : channel_stats(data.images));
  data.validate();
  return data;
}

std::vector<double> synth_angles_truth(std::uint64_t seed, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  for (const auto& s : synth_samples(seed, n)) out.push_back(s.angle);
  return out;
}

Dataset take(const Dataset& data, std::size_t count) {
  const std::size_t n = std::min(count, data.size());
  Dataset out;
  out.num_classes = data.num_classes;
  out.split = data.split;
  nn::Shape4 shape = data.images.shape();
  shape.n = n;
  out.images = nn::Tensor4<float>(shape);
  std::copy_n(data.images.data(), n * shape.item(), out.images.data());
  out.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace rotconv::harness
