/* Copyright 2026 The EdgeSpot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "edgespot/weights.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>

#include "edgespot/error.hpp"

namespace edgespot {
namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > bytes_.size() - pos_)
      throw FormatError("weights: truncated record data");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | b[1] << 8);
  }
  std::uint32_t u32() {
    auto b = take(4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string block_prefix(const LayerSpec& layer, Index b) {
  return layer.name + ".block" + std::to_string(b + 1);
}

float variant_code(Variant v) { return v == Variant::edgespot ? 0.0f : 1.0f; }

ModelConfig config_from_meta(const std::vector<Record>& records) {
  for (const Record& r : records) {
    if (r.name != kMetaRecord) continue;
    if (r.tensor.size() != 2)
      throw FormatError("weights: malformed '" + std::string(kMetaRecord) +
                        "' record");
    const float code = r.tensor[0];
    const float width = r.tensor[1];
    if ((code != 0.0f && code != 1.0f) || width < 1.0f || width > 64.0f ||
        width != static_cast<float>(static_cast<int>(width)))
      throw FormatError("weights: invalid model variant/width in meta record");
    return ModelConfig::make(code == 0.0f ? Variant::edgespot
                                          : Variant::bcresnet,
                             static_cast<int>(width));
  }
  throw FormatError("weights: missing record '" + std::string(kMetaRecord) +
                    "'");
}

}  // namespace

Index WeightSpec::learnable() const {
  switch (role) {
    case WeightRole::meta:
      return 0;
    case WeightRole::norm:
      return 2 * shape.at(1);
    default:
      return shape_size(shape);
  }
}

std::vector<WeightSpec> weight_layout(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<WeightSpec> out;
  auto add = [&](std::string name, Shape shape, WeightRole role) {
    out.push_back({std::move(name), std::move(shape), role});
  };
  add(std::string(kMetaRecord), {2}, WeightRole::meta);

  Index cin = 1;
  for (const LayerSpec& layer : cfg.layers) {
    const Index c = cfg.channels(layer);
    switch (layer.kind) {
      case LayerKind::pcen:
        add(std::string(kPcenRecord), {4}, WeightRole::pcen);
        break;
      case LayerKind::stem_conv:
        add("stem.conv", {c, 1, 5, 5}, WeightRole::weight);
        add("stem.norm", {4, c}, WeightRole::norm);
        cin = c;
        break;
      case LayerKind::fused_block:
      case LayerKind::block: {
        const bool fused = layer.kind == LayerKind::fused_block;
        for (Index b = 0; b < layer.repeat; ++b) {
          const std::string p = block_prefix(layer, b);
          if (cin != c) {
            add(p + ".transition.conv", {c, cin, 1, 1}, WeightRole::weight);
            add(p + ".transition.norm", {4, c}, WeightRole::norm);
          }
          add(p + ".freq.conv", {c, 1, kBlockKernel, 1}, WeightRole::weight);
          add(p + ".freq.norm", {4, c * kSubBands}, WeightRole::norm);
          add(p + ".temporal.conv", {c, fused ? c : 1, 1, kBlockKernel},
              WeightRole::weight);
          add(p + ".temporal.norm", {4, c}, WeightRole::norm);
          if (!fused)
            add(p + ".pointwise.conv", {c, c, 1, 1}, WeightRole::weight);
          cin = c;
        }
        break;
      }
      case LayerKind::head_dw_conv:
        add("head.dw.conv", {cin, 1, 5, 5}, WeightRole::weight);
        add("head.dw.bias", {cin}, WeightRole::bias);
        break;
      case LayerKind::head_pw_conv:
        add("head.pw.conv", {c, cin, 1, 1}, WeightRole::weight);
        add("head.pw.norm", {4, c}, WeightRole::norm);
        cin = c;
        break;
      case LayerKind::positional_encoding:
        add("rpe.filters", {cin, kRpeKernel}, WeightRole::weight);
        add("rpe.bias", {cin}, WeightRole::bias);
        break;
      case LayerKind::attention:
        for (const char* m : {"q", "k", "v"}) {
          add(std::string("attention.w_") + m, {cin, kEmbeddingDim},
              WeightRole::weight);
          add(std::string("attention.b_") + m, {kEmbeddingDim},
              WeightRole::bias);
        }
        add("attention.prelu", {1}, WeightRole::slope);
        break;
      case LayerKind::aggregate:
        add("aggregate.weight", {1, kFrames, 1}, WeightRole::weight);
        add("aggregate.bias", {1}, WeightRole::bias);
        break;
      case LayerKind::pool_project:
        add("project.weight", {kEmbeddingDim, cin}, WeightRole::weight);
        add("project.bias", {kEmbeddingDim}, WeightRole::bias);
        break;
    }
  }
  return out;
}

WeightBundle::WeightBundle(ModelConfig config, std::vector<Record> records)
    : config_(std::move(config)), records_(std::move(records)) {}

const TensorF* WeightBundle::find(std::string_view name) const {
  for (const Record& r : records_)
    if (r.name == name) return &r.tensor;
  return nullptr;
}

const TensorF& WeightBundle::at(std::string_view name) const {
  if (const TensorF* t = find(name)) return *t;
  throw FormatError("weights: missing record '" + std::string(name) + "'");
}

void WeightBundle::set(std::string_view name, TensorF tensor) {
  for (Record& r : records_) {
    if (r.name == name) {
      r.tensor = std::move(tensor);
      return;
    }
  }
  records_.push_back({std::string(name), std::move(tensor)});
}

void WeightBundle::erase(std::string_view name) {
  std::erase_if(records_, [&](const Record& r) { return r.name == name; });
}

std::optional<PcenParams> WeightBundle::pcen() const {
  const TensorF* t = find(kPcenRecord);
  if (!t) return std::nullopt;
  if (t->size() != 4)
    throw FormatError("weights: record 'pcen' must hold 4 values");
  PcenParams p;
  p.alpha = (*t)[0];
  p.r = (*t)[1];
  p.delta = (*t)[2];
  p.s = (*t)[3];
  return p;
}

void WeightBundle::validate() const {
  const std::vector<WeightSpec> layout = weight_layout(config_);
  std::map<std::string, int, std::less<>> seen;
  for (const Record& r : records_) {
    if (++seen[r.name] > 1)
      throw FormatError("weights: duplicate record '" + r.name + "'");
  }
  for (const WeightSpec& spec : layout) {
    const TensorF* t = find(spec.name);
    if (!t)
      throw FormatError("weights: missing record '" + spec.name + "'");
    if (t->shape() != spec.shape)
      throw FormatError("weights: record '" + spec.name + "' has shape " +
                        shape_string(t->shape()) + ", expected " +
                        shape_string(spec.shape));
    if (spec.role == WeightRole::norm) {
      for (Index i = 0; i < spec.shape[1]; ++i)
        if (!((*t)(3, i) >= 0.0f))
          throw ParameterError("weights: record '" + spec.name +
                               "' has a negative running variance");
    }
  }
  if (seen.size() != layout.size()) {
    for (const Record& r : records_) {
      const bool known =
          std::any_of(layout.begin(), layout.end(),
                      [&](const WeightSpec& s) { return s.name == r.name; });
      if (!known)
        throw FormatError("weights: unknown record '" + r.name + "' for " +
                          config_.label());
    }
  }
  const TensorF& meta = at(kMetaRecord);
  if (meta[0] != variant_code(config_.variant) ||
      meta[1] != static_cast<float>(config_.width))
    throw FormatError("weights: bundle was built for a different model than " +
                      config_.label());
  if (auto p = pcen()) p->validate();
}

WeightBundle random_bundle(const ModelConfig& cfg, std::uint64_t seed) {
  Lcg64 rng(seed);
  const PcenParams pcen_defaults;
  std::vector<Record> records;
  for (const WeightSpec& spec : weight_layout(cfg)) {
    TensorF t(spec.shape);
    switch (spec.role) {
      case WeightRole::meta:
        t[0] = variant_code(cfg.variant);
        t[1] = static_cast<float>(cfg.width);
        break;
      case WeightRole::pcen:
        t[0] = static_cast<float>(pcen_defaults.alpha);
        t[1] = static_cast<float>(pcen_defaults.r);
        t[2] = static_cast<float>(pcen_defaults.delta);
        t[3] = static_cast<float>(pcen_defaults.s);
        break;
      case WeightRole::norm: {
        const Index n = spec.shape[1];
        for (Index i = 0; i < n; ++i) t(0, i) = 1.0f + 0.1f * rng.symmetric();
        for (Index i = 0; i < n; ++i) t(1, i) = 0.1f * rng.symmetric();
        for (Index i = 0; i < n; ++i) t(2, i) = 0.1f * rng.symmetric();
        for (Index i = 0; i < n; ++i) t(3, i) = 1.0f + 0.1f * rng.symmetric();
        break;
      }
      default:
        for (float& v : t.values()) v = 0.1f * rng.symmetric();
        break;
    }
    records.push_back({spec.name, std::move(t)});
  }
  return WeightBundle(cfg, std::move(records));
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_records(std::string_view magic,
                                         const std::vector<Record>& records) {
  if (magic.size() != 4) throw ConfigError("weights: magic must be 4 bytes");
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const Record& r : records) {
    if (r.name.size() > 0xFFFF)
      throw FormatError("weights: record name too long");
    if (r.tensor.rank() > 0xFF) throw FormatError("weights: rank too large");
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u8(out, static_cast<std::uint8_t>(r.tensor.rank()));
    for (Index e : r.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float v : r.tensor.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc32(out));
  return out;
}

std::vector<Record> decode_records(std::string_view magic,
                                   std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("weights: file too short");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc32(body) != tail.u32())
    throw FormatError("weights: checksum mismatch (truncated or corrupt)");
  if (std::memcmp(body.data(), magic.data(), 4) != 0)
    throw FormatError("weights: bad magic, expected '" + std::string(magic) +
                      "'");

  Reader in(body.subspan(4));
  const std::uint32_t count = in.u32();
  std::vector<Record> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = in.u16();
    const auto name_bytes = in.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint8_t rank = in.u8();
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& e : shape) {
      e = in.u32();
      if (e == 0)
        throw FormatError("weights: record '" + name + "' has a zero extent");
      n *= static_cast<std::uint64_t>(e);
      if (n > (std::uint64_t{1} << 32))
        throw FormatError("weights: record '" + name + "' is too large");
    }
    const auto data = in.take(static_cast<std::size_t>(n) * 4);
    std::vector<float> values(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, data.data() + 4 * k, 4);
      if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap32(bits);
      values[k] = std::bit_cast<float>(bits);
    }
    records.push_back({std::move(name), TensorF(std::move(shape), std::move(values))});
  }
  if (!in.done()) throw FormatError("weights: trailing bytes after records");
  return records;
}

std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle) {
  bundle.validate();
  return encode_records(kBundleMagic, bundle.records());
}

WeightBundle decode_bundle(std::span<const std::uint8_t> bytes,
                           const ModelConfig& expected) {
  std::vector<Record> records = decode_records(kBundleMagic, bytes);
  const ModelConfig found = config_from_meta(records);
  if (found.variant != expected.variant || found.width != expected.width)
    throw FormatError("weights: bundle holds " + found.label() +
                      ", expected " + expected.label());
  WeightBundle bundle(expected, std::move(records));
  bundle.validate();
  return bundle;
}

WeightBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  std::vector<Record> records = decode_records(kBundleMagic, bytes);
  ModelConfig cfg = config_from_meta(records);
  WeightBundle bundle(std::move(cfg), std::move(records));
  bundle.validate();
  return bundle;
}

std::size_t save_bundle(const WeightBundle& bundle, std::ostream& sink) {
  const auto bytes = encode_bundle(bundle);
  sink.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw FormatError("weights: write failed");
  return bytes.size();
}

std::size_t save_bundle(const WeightBundle& bundle,
                        const std::filesystem::path& path) {
  const auto bytes = encode_bundle(bundle);
  write_file(path, bytes);
  return bytes.size();
}

WeightBundle load_bundle(std::istream& source, const ModelConfig& expected) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)),
                                  std::istreambuf_iterator<char>());
  return decode_bundle(bytes, expected);
}

WeightBundle load_bundle(const std::filesystem::path& path,
                         const ModelConfig& expected) {
  return decode_bundle(read_file(path), expected);
}

WeightBundle load_bundle(const std::filesystem::path& path) {
  return decode_bundle(read_file(path));
}

void save_tensors(const std::filesystem::path& path,
                  const std::vector<Record>& records) {
  write_file(path, encode_records(kTensorMagic, records));
}

std::vector<Record> load_tensors(const std::filesystem::path& path) {
  return decode_records(kTensorMagic, read_file(path));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write " + path.string());
}

}  // namespace edgespot
