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

#include "rotconv/io/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <type_traits>
#include <variant>

namespace rotconv::io {
namespace {

static_assert(std::numeric_limits<float>::is_iec559);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class Writer {
 public:
  template <typename U>
  void put(U value) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      bytes_.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
    }
  }
  void put_real(double value) { put(std::bit_cast<std::uint32_t>(static_cast<float>(value))); }
  void put_reals(std::span<const float> values) {
    for (float v : values) put(std::bit_cast<std::uint32_t>(v));
  }
  void put_rank(std::uint32_t rank, std::size_t width) {
    for (std::size_t b = 0; b < width; ++b) {
      bytes_.push_back(static_cast<std::uint8_t>(rank >> (8 * b)));
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      value |= static_cast<U>(static_cast<U>(bytes_[pos_ + b]) << (8 * b));
    }
    pos_ += sizeof(U);
    return value;
  }
  float get_real(const char* what) {
    const float v = std::bit_cast<float>(get<std::uint32_t>(what));
    if (!std::isfinite(v)) {
      throw CheckpointError(CheckpointErrc::kBadValue, std::string("non-finite ") + what + at());
    }
    return v;
  }
  std::vector<float> get_reals(std::size_t count, const char* what) {
    need(count * 4, what);
    std::vector<float> out(count);
    for (auto& v : out) v = get_real(what);
    return out;
  }
  std::uint32_t get_rank(std::size_t width) {
    need(width, "rank");
    std::uint32_t value = 0;
    for (std::size_t b = 0; b < width; ++b) {
      value |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    }
    pos_ += width;
    return value;
  }
  [[nodiscard]] std::size_t position() const { return pos_; }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }
  [[nodiscard]] std::string at() const { return " at byte " + std::to_string(pos_); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrc::kTruncated,
                            std::string("stream ends inside ") + what + at());
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename U>
U narrow(std::size_t value, const char* what) {
  if (value > std::numeric_limits<U>::max()) {
    throw CheckpointError(
        CheckpointErrc::kUnsupportedLayer,
        std::string(what) + " " + std::to_string(value) + " does not fit its field");
  }
  return static_cast<U>(value);
}

void put_conv_dims(Writer& w, std::size_t n, std::size_t m, std::size_t stride, std::size_t pad) {
  w.put(narrow<std::uint16_t>(n, "out_channels"));
  w.put(narrow<std::uint16_t>(m, "in_channels"));
  w.put(narrow<std::uint8_t>(stride, "stride"));
  w.put(narrow<std::uint8_t>(pad, "pad"));
}

void encode(Writer& w, const nn::DenseConvLayer<float>& l) {
  l.validate();
  w.put(narrow<std::uint16_t>(l.out_channels, "out_channels"));
  w.put(narrow<std::uint16_t>(l.in_channels, "in_channels"));
  w.put(narrow<std::uint8_t>(l.kernel_h, "kernel_h"));
  w.put(narrow<std::uint8_t>(l.kernel_w, "kernel_w"));
  w.put(narrow<std::uint8_t>(l.stride, "stride"));
  w.put(narrow<std::uint8_t>(l.pad, "pad"));
  w.put(static_cast<std::uint8_t>(l.has_bias() ? 1 : 0));
  w.put_reals(l.weights);
  w.put_reals(l.bias);
}

void encode(Writer& w, const rotate::RotateLayer<float>& l) {
  l.validate();
  put_conv_dims(w, l.out_channels, l.in_channels, l.stride, l.pad);
  w.put_reals(l.weights);
  w.put_reals(l.angles);
}

void encode(Writer& w, const AiConvLayer<float>& l) {
  const ai::AiLayerState& s = l.state;
  s.validate();
  if (s.out_channels != l.dense.out_channels || s.in_channels != l.dense.in_channels) {
    throw CheckpointError(CheckpointErrc::kUnsupportedLayer,
                          "pruned-layer state disagrees with its dense weights");
  }
  put_conv_dims(w, l.dense.out_channels, l.dense.in_channels, l.dense.stride, l.dense.pad);
  const bool flagged_empty = s.point_count() < 2;
  w.put(static_cast<std::uint32_t>(flagged_empty ? 0 : s.alive_count()));
  w.put_real(flagged_empty ? 0.0 : s.w_min);
  w.put_real(flagged_empty ? 0.0 : s.tau);
  w.put(narrow<std::uint8_t>(s.k, "k"));
  if (flagged_empty) return;
  const std::size_t width = ai::rank_width_bytes(s.point_count());
  for (const ai::AiKernel& kern : s.kernels) {
    w.put(narrow<std::uint16_t>(kern.out, "kernel out index"));
    w.put(narrow<std::uint16_t>(kern.in, "kernel in index"));
    for (std::uint8_t cell : kern.cells) w.put(cell);
    for (std::uint32_t rank : kern.ranks) w.put_rank(rank, width);
  }
}

void encode(Writer& w, const nn::BatchNormLayer<float>& l) {
  l.validate();
  w.put(narrow<std::uint16_t>(l.channels, "channels"));
  w.put_real(l.eps);
  w.put_real(l.momentum);
  w.put_reals(l.gamma);
  w.put_reals(l.beta);
  w.put_reals(l.running_mean);
  w.put_reals(l.running_var);
}

void encode(Writer& w, const nn::LinearLayer<float>& l) {
  l.validate();
  w.put(narrow<std::uint32_t>(l.out_features, "out_features"));
  w.put(narrow<std::uint32_t>(l.in_features, "in_features"));
  w.put(static_cast<std::uint8_t>(l.bias.empty() ? 0 : 1));
  w.put_reals(l.weights);
  w.put_reals(l.bias);
}

[[noreturn]] void bad(CheckpointErrc code, const std::string& what, const Reader& r) {
  throw CheckpointError(code, what + r.at());
}

struct Dims {
  std::size_t n, m, stride, pad;
};

Dims read_conv_dims(Reader& r) {
  Dims d{};
  d.n = r.get<std::uint16_t>("out_channels");
  d.m = r.get<std::uint16_t>("in_channels");
  d.stride = r.get<std::uint8_t>("stride");
  d.pad = r.get<std::uint8_t>("pad");
  if (d.n == 0 || d.m == 0 || d.stride == 0) {
    bad(CheckpointErrc::kBadDims, "zero channel count or stride", r);
  }
  return d;
}

bool read_flag(Reader& r, const char* what) {
  const auto flag = r.get<std::uint8_t>(what);
  if (flag > 1) bad(CheckpointErrc::kBadValue, std::string(what) + " must be 0 or 1", r);
  return flag == 1;
}

nn::DenseConvLayer<float> decode_dense(Reader& r) {
  nn::DenseConvLayer<float> l;
  l.out_channels = r.get<std::uint16_t>("out_channels");
  l.in_channels = r.get<std::uint16_t>("in_channels");
  l.kernel_h = r.get<std::uint8_t>("kernel_h");
  l.kernel_w = r.get<std::uint8_t>("kernel_w");
  l.stride = r.get<std::uint8_t>("stride");
  l.pad = r.get<std::uint8_t>("pad");
  if (l.out_channels == 0 || l.in_channels == 0 || l.kernel_h == 0 || l.kernel_w == 0 ||
      l.stride == 0) {
    bad(CheckpointErrc::kBadDims, "zero dimension in dense conv", r);
  }
  const bool has_bias = read_flag(r, "has_bias");
  l.weights = r.get_reals(l.out_channels * l.in_channels * l.kernel_area(), "conv weights");
  if (has_bias) l.bias = r.get_reals(l.out_channels, "conv bias");
  return l;
}

rotate::RotateLayer<float> decode_rotate(Reader& r, rotate::AngleSharing sharing) {
  const Dims d = read_conv_dims(r);
  auto l = rotate::RotateLayer<float>::zeros(d.n, d.m, sharing, d.stride, d.pad);
  l.weights = r.get_reals(d.n * d.m * 3, "rotate weights");
  const std::size_t angle_pos = r.position();
  l.angles = r.get_reals(l.angles.size(), "rotate angles");
  for (float a : l.angles) {
    if (!(a >= 0.0F && a < 180.0F)) {
      throw CheckpointError(CheckpointErrc::kBadValue, "angle " + std::to_string(a) +
                                                           " outside [0, 180) in block at byte " +
                                                           std::to_string(angle_pos));
    }
  }
  return l;
}

AiConvLayer<float> decode_ai(Reader& r) {
  const Dims d = read_conv_dims(r);
  const auto n_alive = r.get<std::uint32_t>("n_alive");
  const auto w_min_bits = r.get<std::uint32_t>("w_min");
  const auto tau_bits = r.get<std::uint32_t>("tau");
  const auto k = r.get<std::uint8_t>("k");
  const float w_min = std::bit_cast<float>(w_min_bits);
  const float tau = std::bit_cast<float>(tau_bits);
  if (k < 1 || k > ai::kKernelCells) bad(CheckpointErrc::kBadValue, "k outside 1..9", r);
  if (!std::isfinite(w_min) || !std::isfinite(tau) || tau < 0.0F) {
    bad(CheckpointErrc::kBadValue, "w_min/tau not finite or tau negative", r);
  }
  if (n_alive > d.n * d.m) {
    bad(CheckpointErrc::kBadKernelIndex, "more alive kernels than the layer holds", r);
  }
  const std::size_t n = static_cast<std::size_t>(n_alive) * k;
  if (n_alive == 0 && (w_min_bits != 0 || tau_bits != 0)) {
    bad(CheckpointErrc::kBadValue, "empty pruned layer must store w_min = tau = 0", r);
  }
  if (n_alive != 0 && n < 2) {
    bad(CheckpointErrc::kBadValue, "pruned layer with one reserved weight must be stored empty", r);
  }

  ai::AiLayerState s;
  s.out_channels = d.n;
  s.in_channels = d.m;
  s.k = k;
  s.w_min = w_min;
  s.tau = tau;
  s.kernels.resize(n_alive);
  const std::size_t width = ai::rank_width_bytes(n);
  std::vector<bool> rank_seen(n, false);
  for (std::size_t a = 0; a < n_alive; ++a) {
    ai::AiKernel& kern = s.kernels[a];
    kern.out = r.get<std::uint16_t>("kernel out index");
    kern.in = r.get<std::uint16_t>("kernel in index");
    if (kern.out >= d.n || kern.in >= d.m) {
      bad(CheckpointErrc::kBadKernelIndex, "kernel index outside the layer", r);
    }
    if (a > 0) {
      const ai::AiKernel& prev = s.kernels[a - 1];
      if (std::pair(prev.out, prev.in) >= std::pair(kern.out, kern.in)) {
        bad(CheckpointErrc::kBadKernelIndex, "kernel indices not strictly ascending", r);
      }
    }
    kern.cells.resize(k);
    std::array<bool, ai::kKernelCells> cell_seen{};
    for (auto& cell : kern.cells) {
      cell = r.get<std::uint8_t>("cell index");
      if (cell >= ai::kKernelCells) bad(CheckpointErrc::kBadCell, "cell index above 8", r);
      if (cell_seen[cell]) bad(CheckpointErrc::kDuplicateCell, "cell repeated in kernel", r);
      cell_seen[cell] = true;
    }
    if (!std::is_sorted(kern.cells.begin(), kern.cells.end())) {
      bad(CheckpointErrc::kBadCell, "cell indices not ascending", r);
    }
    kern.ranks.resize(k);
    for (auto& rank : kern.ranks) {
      rank = r.get_rank(width);
      if (rank >= n) {
        bad(CheckpointErrc::kRankOutOfRange,
            "rank " + std::to_string(rank) + " >= " + std::to_string(n), r);
      }
      if (rank_seen[rank]) bad(CheckpointErrc::kDuplicateRank, "rank repeated", r);
      rank_seen[rank] = true;
    }
  }
  return restore_ai_layer<float>(std::move(s), d.stride, d.pad);
}

nn::BatchNormLayer<float> decode_bn(Reader& r) {
  const std::size_t c = r.get<std::uint16_t>("channels");
  if (c == 0) bad(CheckpointErrc::kBadDims, "batchnorm with zero channels", r);
  auto l = nn::BatchNormLayer<float>::identity(c);
  l.eps = r.get_real("eps");
  l.momentum = r.get_real("momentum");
  if (!(l.eps > 0.0) || l.momentum < 0.0 || l.momentum > 1.0) {
    bad(CheckpointErrc::kBadValue, "eps must be positive and momentum in [0, 1]", r);
  }
  l.gamma = r.get_reals(c, "gamma");
  l.beta = r.get_reals(c, "beta");
  l.running_mean = r.get_reals(c, "running mean");
  l.running_var = r.get_reals(c, "running variance");
  for (float v : l.running_var) {
    if (v < 0.0F) bad(CheckpointErrc::kBadValue, "negative running variance", r);
  }
  return l;
}

nn::LinearLayer<float> decode_linear(Reader& r) {
  nn::LinearLayer<float> l;
  l.out_features = r.get<std::uint32_t>("out_features");
  l.in_features = r.get<std::uint32_t>("in_features");
  if (l.out_features == 0 || l.in_features == 0) {
    bad(CheckpointErrc::kBadDims, "linear layer with a zero dimension", r);
  }
  const bool has_bias = read_flag(r, "has_bias");
  l.weights = r.get_reals(l.out_features * l.in_features, "linear weights");
  if (has_bias) l.bias = r.get_reals(l.out_features, "linear bias");
  return l;
}

}  // namespace

std::string_view errc_name(CheckpointErrc code) {
  switch (code) {
    case CheckpointErrc::kBadMagic:
      return "bad magic";
    case CheckpointErrc::kUnsupportedVersion:
      return "unsupported version";
    case CheckpointErrc::kTruncated:
      return "truncated";
    case CheckpointErrc::kTrailingBytes:
      return "trailing bytes";
    case CheckpointErrc::kUnknownTag:
      return "unknown tag";
    case CheckpointErrc::kBadDims:
      return "bad dimensions";
    case CheckpointErrc::kBadValue:
      return "bad value";
    case CheckpointErrc::kBadCell:
      return "bad cell index";
    case CheckpointErrc::kDuplicateCell:
      return "duplicate cell index";
    case CheckpointErrc::kRankOutOfRange:
      return "rank out of range";
    case CheckpointErrc::kDuplicateRank:
      return "duplicate rank";
    case CheckpointErrc::kBadKernelIndex:
      return "bad kernel index";
    case CheckpointErrc::kUnsupportedLayer:
      return "unsupported layer";
    case CheckpointErrc::kIo:
      return "i/o";
  }
  return "unknown";
}

std::size_t ai_payload_bytes(std::size_t n_alive, unsigned k) {
  const std::size_t n = n_alive * k;
  const std::size_t per_kernel = n < 2 ? 0 : 4 + k * (1 + ai::rank_width_bytes(n));
  return 19 + (n < 2 ? 0 : n_alive) * per_kernel;
}

std::vector<std::uint8_t> export_checkpoint(const Model& model) {
  Writer w;
  for (char c : kCheckpointMagic) w.put(static_cast<std::uint8_t>(c));
  w.put(kCheckpointVersion);
  w.put(narrow<std::uint16_t>(model.layers.size(), "layer count"));
  for (const auto& layer : model.layers) {
    w.put(static_cast<std::uint8_t>(tag_of(layer)));
    std::visit([&](const auto& l) { encode(w, l); }, layer);
  }
  return w.take();
}

Model import_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kCheckpointMagic) {
    if (r.get<std::uint8_t>("magic") != static_cast<std::uint8_t>(c)) {
      throw CheckpointError(CheckpointErrc::kBadMagic, "stream does not start with \"RCNVCKPT\"");
    }
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(
        CheckpointErrc::kUnsupportedVersion,
        "version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto count = r.get<std::uint16_t>("layer count");
  Model model;
  model.layers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto tag = r.get<std::uint8_t>("record tag");
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::kDenseConv:
        model.layers.emplace_back(decode_dense(r));
        break;
      case LayerTag::kRotatePerKernel:
        model.layers.emplace_back(decode_rotate(r, rotate::AngleSharing::kPerKernel));
        break;
      case LayerTag::kRotatePerFilter:
        model.layers.emplace_back(decode_rotate(r, rotate::AngleSharing::kPerFilter));
        break;
      case LayerTag::kAiPruned:
        model.layers.emplace_back(decode_ai(r));
        break;
      case LayerTag::kBatchNorm:
        model.layers.emplace_back(decode_bn(r));
        break;
      case LayerTag::kLinear:
        model.layers.emplace_back(decode_linear(r));
        break;
      default:
        bad(CheckpointErrc::kUnknownTag, "tag " + std::to_string(tag), r);
    }
  }
  if (!r.done()) bad(CheckpointErrc::kTrailingBytes, "data after the last record", r);
  return model;
}

void write_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto bytes = export_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrc::kIo, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrc::kIo, "write failed for " + path.string());
}

Model read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return import_checkpoint(bytes);
}

}  // namespace rotconv::io
