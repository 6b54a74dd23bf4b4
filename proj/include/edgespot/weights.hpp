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
#ifndef EDGESPOT_WEIGHTS_HPP_
#define EDGESPOT_WEIGHTS_HPP_

// Binary weight bundles and tensor containers.
//
// Layout (little-endian):
//   magic       4 bytes  "ESW1" (bundle) or "EST1" (tensor container)
//   count       u32      number of records
//   per record:
//     name_len  u16
//     name      name_len bytes, UTF-8
//     rank      u8
//     extents   rank x u32
//     data      prod(extents) x float32
//   crc         u32      CRC-32 (zlib polynomial) of every preceding byte
//
// A bundle carries its configuration in the record "meta.config" = {variant,
// width} (variant 0 = edgespot, 1 = bcresnet) and, for edgespot, the PCEN
// scalars in "pcen" = {alpha, r, delta, s}. Norm records are (4, N) with rows
// gamma, beta, running mean, running variance.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgespot/frontend.hpp"
#include "edgespot/model.hpp"
#include "edgespot/tensor.hpp"

namespace edgespot {

inline constexpr std::string_view kBundleMagic = "ESW1";
inline constexpr std::string_view kTensorMagic = "EST1";
inline constexpr std::string_view kMetaRecord = "meta.config";
inline constexpr std::string_view kPcenRecord = "pcen";

struct Record {
  std::string name;
  TensorF tensor;
  bool operator==(const Record&) const = default;
};

enum class WeightRole { meta, pcen, weight, bias, norm, slope };

struct WeightSpec {
  std::string name;
  Shape shape;
  WeightRole role;

  // Trainable entries: running statistics and metadata are excluded.
  Index learnable() const;
};

// Every record a bundle for `config` must contain, in canonical order.
std::vector<WeightSpec> weight_layout(const ModelConfig& config);

class WeightBundle {
 public:
  WeightBundle(ModelConfig config, std::vector<Record> records);

  const ModelConfig& config() const { return config_; }
  const std::vector<Record>& records() const { return records_; }

  const TensorF* find(std::string_view name) const;
  // Throws FormatError naming the layer when absent.
  const TensorF& at(std::string_view name) const;
  void set(std::string_view name, TensorF tensor);
  void erase(std::string_view name);

  std::optional<PcenParams> pcen() const;

  // Checks record names, multiplicity, shapes and the PCEN domain against
  // the configuration.
  void validate() const;

 private:
  ModelConfig config_;
  std::vector<Record> records_;
};

// Deterministic 64-bit linear congruential generator (Knuth's MMIX
// constants). Floats are built from the top 24 bits, so every draw is exactly
// representable and platform independent.
class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }
  // Uniform on [-1, 1) in steps of 2^-23.
  float symmetric() {
    const auto top = static_cast<std::int64_t>(next() >> 40);
    return static_cast<float>(top - (std::int64_t{1} << 23)) * 0x1.0p-23f;
  }

 private:
  std::uint64_t state_;
};

// Weights, biases and slopes uniform in [-0.1, 0.1); norm gamma and variance
// 1 + [-0.1, 0.1), beta and mean [-0.1, 0.1); PCEN alpha = 0.98, r = 0.5,
// delta = 2, s = 0.025.
WeightBundle random_bundle(const ModelConfig& config, std::uint64_t seed);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_records(std::string_view magic,
                                         const std::vector<Record>& records);
// Verifies length and checksum before parsing; never returns partial data.
std::vector<Record> decode_records(std::string_view magic,
                                   std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_bundle(const WeightBundle& bundle);
WeightBundle decode_bundle(std::span<const std::uint8_t> bytes,
                           const ModelConfig& expected);
// Takes the configuration from the bundle's meta record.
WeightBundle decode_bundle(std::span<const std::uint8_t> bytes);

std::size_t save_bundle(const WeightBundle& bundle, std::ostream& sink);
std::size_t save_bundle(const WeightBundle& bundle,
                        const std::filesystem::path& path);
WeightBundle load_bundle(std::istream& source, const ModelConfig& expected);
WeightBundle load_bundle(const std::filesystem::path& path,
                         const ModelConfig& expected);
WeightBundle load_bundle(const std::filesystem::path& path);

void save_tensors(const std::filesystem::path& path,
                  const std::vector<Record>& records);
std::vector<Record> load_tensors(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace edgespot

#endif  // EDGESPOT_WEIGHTS_HPP_
