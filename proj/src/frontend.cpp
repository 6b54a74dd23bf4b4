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
#include "edgespot/frontend.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "edgespot/error.hpp"

namespace edgespot {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Numpy-style "reflect" index (edge sample not repeated).
Index reflect(Index i, Index n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n].
Index uniform_upto(std::mt19937_64& rng, Index n) {
  const auto v = static_cast<Index>(uniform01(rng) * static_cast<double>(n + 1));
  return std::min(v, n);
}

}  // namespace

Waveform fit_to_clip(Waveform w) {
  w.samples.resize(static_cast<std::size_t>(kClipSamples), 0.0f);
  return w;
}

MelSpectrogram::MelSpectrogram(TensorF energies)
    : energies_(std::move(energies)) {
  require_rank("mel spectrogram", energies_.rank(), 2);
  for (float v : energies_.values()) {
    if (!(v >= 0.0f))
      throw NumericError("mel spectrogram: energies must be finite and >= 0");
  }
}

Eigen::MatrixXf mel_filterbank(const StftOptions& o, int rate) {
  const Index bins = o.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(o.f_min);
  const double mel_hi = hz_to_mel(o.f_max);
  std::vector<double> edges(static_cast<std::size_t>(o.mel_bands + 2));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                  static_cast<double>(o.mel_bands + 1);
    edges[i] = mel_to_hz(m);
  }
  Eigen::MatrixXf fb = Eigen::MatrixXf::Zero(o.mel_bands, bins);
  for (Index m = 0; m < o.mel_bands; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * rate /
                       static_cast<double>(o.fft_size);
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, k) = static_cast<float>(std::max(0.0, std::min(up, down)));
    }
  }
  return fb;
}

MelSpectrogram melspec(const Waveform& input, const StftOptions& o) {
  if (input.samples.empty()) throw FormatError("melspec: empty waveform");
  if (input.rate != kSampleRate)
    throw FormatError("melspec: sample rate " + std::to_string(input.rate) +
                      " Hz requires resampling to 16000 Hz");
  if (o.window_length > o.fft_size || o.hop <= 0)
    throw ConfigError("melspec: window must fit the FFT and hop must be > 0");

  const Waveform w = fit_to_clip(input);
  const Index n = static_cast<Index>(w.samples.size());
  const Index pad = o.window_length / 2;
  const Index frames = 1 + n / o.hop;
  const Index bins = o.fft_size / 2 + 1;

  std::vector<double> window(static_cast<std::size_t>(o.window_length));
  for (Index i = 0; i < o.window_length; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                     static_cast<double>(i) /
                                     static_cast<double>(o.window_length));

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(o.fft_size));
  std::vector<std::complex<double>> spectrum;
  Eigen::MatrixXf power(bins, frames);
  for (Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (Index i = 0; i < o.window_length; ++i) {
      const Index src = reflect(t * o.hop + i - pad, n);
      frame[i] = window[i] * w.samples[src];
    }
    fft.fwd(spectrum, frame);
    for (Index k = 0; k < bins; ++k)
      power(k, t) = static_cast<float>(std::norm(spectrum[k]));
  }

  const Eigen::MatrixXf fb = mel_filterbank(o);
  TensorF energies({o.mel_bands, frames});
  energies.matrix().noalias() = fb * power;
  // Filterbank weights are non-negative; clamp float rounding residue.
  energies.vector() = energies.vector().cwiseMax(0.0f);
  return MelSpectrogram(std::move(energies));
}

void PcenParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ParameterError("pcen: alpha must lie in [0, 1], got " +
                         std::to_string(alpha));
  if (!(r > 0.0 && r <= 1.0))
    throw ParameterError("pcen: r must lie in (0, 1], got " +
                         std::to_string(r));
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw ParameterError("pcen: delta must be > 0, got " +
                         std::to_string(delta));
  if (!(s > 0.0 && s < 1.0))
    throw ParameterError("pcen: s must lie in (0, 1), got " +
                         std::to_string(s));
  if (!(eps > 0.0)) throw ParameterError("pcen: eps must be > 0");
}

TensorF pcen_smooth(const TensorF& e, double s) {
  if (!(s > 0.0 && s <= 1.0))
    throw ParameterError("pcen_smooth: s must lie in (0, 1], got " +
                         std::to_string(s));
  require_rank("pcen_smooth", e.rank(), 2);
  TensorF m(e.shape());
  const Index bands = e.extent(0);
  const Index frames = e.extent(1);
  for (Index f = 0; f < bands; ++f) {
    double state = e(f, 0);
    m(f, 0) = static_cast<float>(state);
    for (Index t = 1; t < frames; ++t) {
      state = (1.0 - s) * state + s * static_cast<double>(e(f, t));
      m(f, t) = static_cast<float>(state);
    }
  }
  return m;
}

TensorF pcen(const TensorF& e, const PcenParams& p) {
  p.validate();
  require_rank("pcen", e.rank(), 2);
  for (float v : e.values()) {
    if (std::isnan(v)) throw NumericError("pcen: NaN in input energies");
    if (v < 0.0f) throw NumericError("pcen: negative input energy");
  }
  const TensorF m = pcen_smooth(e, p.s);
  const double offset = std::pow(p.delta, p.r);
  TensorF out(e.shape());
  for (Index i = 0; i < e.size(); ++i) {
    const double gain = std::pow(p.eps + m[i], p.alpha);
    const double v = std::pow(e[i] / gain + p.delta, p.r) - offset;
    if (!std::isfinite(v)) throw NumericError("pcen: non-finite output");
    out[i] = static_cast<float>(v);
  }
  return out;
}

AugmentPlan draw_augment_plan(const AugmentSpec& spec, Index rows, Index cols,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentPlan plan;
  plan.stretch =
      spec.stretch_lo + (spec.stretch_hi - spec.stretch_lo) * uniform01(rng);
  auto draw = [&](Index limit, Index max_width) {
    const Index width = uniform_upto(rng, std::min(max_width, limit));
    const Index start = uniform_upto(rng, limit - width);
    return MaskBand{start, width};
  };
  for (Index i = 0; i < spec.freq_masks; ++i)
    plan.freq.push_back(draw(rows, spec.freq_mask_width));
  for (Index i = 0; i < spec.time_masks; ++i)
    plan.time.push_back(draw(cols, spec.time_mask_width));
  return plan;
}

TensorF apply_augment(const TensorF& x, const AugmentPlan& plan) {
  require_rank("spec_augment", x.rank(), 2);
  if (!(plan.stretch > 0.0))
    throw ParameterError("spec_augment: stretch factor must be > 0");
  const Index rows = x.extent(0);
  const Index cols = x.extent(1);
  TensorF out(x.shape());
  if (plan.stretch == 1.0) {
    out = x;
  } else {
    const auto stretched = std::max<Index>(
        1, static_cast<Index>(std::lround(cols * plan.stretch)));
    for (Index j = 0; j < std::min(stretched, cols); ++j) {
      const double pos = static_cast<double>(j) / plan.stretch;
      const auto lo = static_cast<Index>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      for (Index f = 0; f < rows; ++f) {
        double v = 0.0;
        if (lo < cols) v = (1.0 - frac) * x(f, lo);
        if (lo + 1 < cols) v += frac * x(f, lo + 1);
        out(f, j) = static_cast<float>(v);
      }
    }
  }
  for (const MaskBand& m : plan.freq)
    for (Index f = m.start; f < std::min(rows, m.start + m.width); ++f)
      for (Index t = 0; t < cols; ++t) out(f, t) = 0.0f;
  for (const MaskBand& m : plan.time)
    for (Index t = m.start; t < std::min(cols, m.start + m.width); ++t)
      for (Index f = 0; f < rows; ++f) out(f, t) = 0.0f;
  return out;
}

TensorF spec_augment(const TensorF& x, const AugmentSpec& spec,
                     std::uint64_t seed) {
  require_rank("spec_augment", x.rank(), 2);
  return apply_augment(
      x, draw_augment_plan(spec, x.extent(0), x.extent(1), seed));
}

}  // namespace edgespot
