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
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "edgespot/error.hpp"
#include "edgespot/frontend.hpp"

namespace edgespot {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::vector<std::uint8_t> encode(const Waveform& w, std::uint16_t format) {
  const std::uint16_t bits = format == kFormatPcm ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.rate));
  put_u32(out, static_cast<std::uint32_t>(w.rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : w.samples) {
    if (format == kFormatPcm) {
      const double clipped = std::clamp(static_cast<double>(s), -1.0, 1.0);
      const long q = std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

}  // namespace

Waveform parse_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw FormatError("wav: chunk extends past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && size >= 26)
        format = read_u16(chunk + 8 + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (channels != 1)
        throw FormatError("wav: expected mono, got " +
                          std::to_string(channels) + " channels");
      Waveform w;
      w.rate = static_cast<int>(rate);
      const std::uint8_t* p = chunk + 8;
      if (format == kFormatPcm && bits == 16) {
        w.samples.resize(size / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i)
          w.samples[i] =
              static_cast<float>(static_cast<std::int16_t>(read_u16(p + 2 * i))) /
              32768.0f;
      } else if (format == kFormatFloat && bits == 32) {
        w.samples.resize(size / 4);
        for (std::size_t i = 0; i < w.samples.size(); ++i)
          w.samples[i] = std::bit_cast<float>(read_u32(p + 4 * i));
      } else {
        throw FormatError("wav: unsupported encoding (format " +
                          std::to_string(format) + ", " +
                          std::to_string(bits) + " bits)");
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError("wav: no data chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("wav: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& w) {
  return encode(w, kFormatPcm);
}
std::vector<std::uint8_t> encode_wav_float32(const Waveform& w) {
  return encode(w, kFormatFloat);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav_pcm16(w);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("wav: cannot write " + path.string());
}

}  // namespace edgespot
