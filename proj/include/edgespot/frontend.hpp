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
#ifndef EDGESPOT_FRONTEND_HPP_
#define EDGESPOT_FRONTEND_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgespot/tensor.hpp"

namespace edgespot {

inline constexpr int kSampleRate = 16000;
inline constexpr Index kClipSamples = 16000;
inline constexpr Index kMelBands = 40;
inline constexpr Index kFrames = 101;

struct Waveform {
  std::vector<float> samples;
  int rate = kSampleRate;
};

// Zero-pads or trims to exactly one second.
Waveform fit_to_clip(Waveform w);

// RIFF/WAVE reader: mono PCM16 (scaled by 1/32768) or IEEE float32.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(const std::vector<std::uint8_t>& bytes);
// Writes mono PCM16, clipping to [-1, 1).
void write_wav(const std::filesystem::path& path, const Waveform& w);
std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& w);
std::vector<std::uint8_t> encode_wav_float32(const Waveform& w);

struct StftOptions {
  Index window_length = 400;  // 25 ms
  Index hop = 160;            // 10 ms
  Index fft_size = 512;
  Index mel_bands = kMelBands;
  double f_min = 0.0;
  double f_max = 8000.0;
};

// A (bands x frames) map of non-negative mel energies, 40 x 101 for a
// one-second clip under the default options.
class MelSpectrogram {
 public:
  MelSpectrogram() = default;
  explicit MelSpectrogram(TensorF energies);

  const TensorF& energies() const { return energies_; }
  Index bands() const { return energies_.extent(0); }
  Index frames() const { return energies_.extent(1); }

 private:
  TensorF energies_;
};

// HTK-scale triangular filterbank, peak-normalized, shape (bands, fft/2+1).
Eigen::MatrixXf mel_filterbank(const StftOptions& options,
                               int rate = kSampleRate);

// Centered (reflect-padded) STFT power spectrum, Hann window, followed by the
// mel filterbank. The input is fit to one second first.
MelSpectrogram melspec(const Waveform& w, const StftOptions& options = {});

// Learned channel-shared PCEN scalars; eps is fixed.
struct PcenParams {
  double alpha = 0.98;
  double r = 0.5;
  double delta = 2.0;
  double s = 0.025;
  double eps = 1e-6;

  // Throws ParameterError unless alpha in [0,1], r in (0,1], delta > 0,
  // s in (0,1).
  void validate() const;
};

// M(0,f) = E(0,f); M(t,f) = (1-s) M(t-1,f) + s E(t,f). `energies` is
// (bands, frames). Accepts s in (0, 1].
TensorF pcen_smooth(const TensorF& energies, double s);

// (E / (eps + M)^alpha + delta)^r - delta^r.
TensorF pcen(const TensorF& energies, const PcenParams& params);
inline TensorF pcen(const MelSpectrogram& mel, const PcenParams& params) {
  return pcen(mel.energies(), params);
}

struct AugmentSpec {
  Index freq_mask_width = 6;
  Index time_mask_width = 8;
  double stretch_lo = 0.9;
  double stretch_hi = 1.1;
  Index freq_masks = 1;
  Index time_masks = 1;

  static AugmentSpec identity() { return {0, 0, 1.0, 1.0, 1, 1}; }
};

struct MaskBand {
  Index start = 0;
  Index width = 0;
};

// A concrete draw of stretch factor and masks.
struct AugmentPlan {
  double stretch = 1.0;
  std::vector<MaskBand> freq;
  std::vector<MaskBand> time;
};

AugmentPlan draw_augment_plan(const AugmentSpec& spec, Index rows, Index cols,
                              std::uint64_t seed);
// Linear-interpolation time stretch, pad/crop back to the input length, then
// zero the masked rows and columns.
TensorF apply_augment(const TensorF& x, const AugmentPlan& plan);
TensorF spec_augment(const TensorF& x, const AugmentSpec& spec,
                     std::uint64_t seed);

}  // namespace edgespot

#endif  // EDGESPOT_FRONTEND_HPP_
