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
#ifndef EDGESPOT_KERNELS_HPP_
#define EDGESPOT_KERNELS_HPP_

// Inference kernels over channel-major tensors: grouped/dilated/strided
// convolution, inference-mode (sub-spectral) batch norm and pointwise
// activations. All functions are pure and thread-safe.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>

#include "edgespot/error.hpp"
#include "edgespot/tensor.hpp"

namespace edgespot {

struct AxisPadding {
  Index before = 0;
  Index after = 0;

  static AxisPadding valid() { return {0, 0}; }

  // Length-preserving padding for stride 1. Even effective kernels put the
  // extra tap on the leading side, i.e. taps cover offsets [-k/2, k/2 - 1].
  static AxisPadding same(Index kernel, Index dilation = 1) {
    const Index total = dilation * (kernel - 1);
    return {total - total / 2, total / 2};
  }

  bool operator==(const AxisPadding&) const = default;
};

struct Stride2 {
  Index freq = 1;
  Index time = 1;
  bool operator==(const Stride2&) const = default;
};
using Dilation2 = Stride2;

struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index groups = 1;
  Index kernel_freq = 1;
  Index kernel_time = 1;
  Stride2 stride;
  Dilation2 dilation;
  AxisPadding pad_freq;
  AxisPadding pad_time;
  bool bias = false;

  bool depthwise() const {
    return groups == in_channels && groups == out_channels && groups > 1;
  }

  Shape weight_shape() const {
    return {out_channels, in_channels / groups, kernel_freq, kernel_time};
  }
  Shape weight_shape_1d() const {
    return {out_channels, in_channels / groups, kernel_time};
  }

  Index output_freq(Index freq) const {
    return output_extent(freq, kernel_freq, stride.freq, dilation.freq,
                         pad_freq);
  }
  Index output_time(Index time) const {
    return output_extent(time, kernel_time, stride.time, dilation.time,
                         pad_time);
  }

  static Index output_extent(Index in, Index kernel, Index stride,
                             Index dilation, AxisPadding pad) {
    const Index span = dilation * (kernel - 1) + 1;
    const Index padded = in + pad.before + pad.after;
    if (padded < span) return 0;
    return (padded - span) / stride + 1;
  }

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0 || groups <= 0)
      throw ConfigError("conv: channel and group counts must be positive");
    if (in_channels % groups != 0 || out_channels % groups != 0)
      throw ConfigError("conv: channels (" + std::to_string(in_channels) +
                        " in, " + std::to_string(out_channels) +
                        " out) not divisible by groups " +
                        std::to_string(groups));
    if (kernel_freq <= 0 || kernel_time <= 0)
      throw ConfigError("conv: kernel extents must be positive");
    if (stride.freq < 1 || stride.time < 1)
      throw ConfigError("conv: stride must be >= 1");
    if (dilation.freq < 1 || dilation.time < 1)
      throw ConfigError("conv: dilation must be >= 1");
    if (pad_freq.before < 0 || pad_freq.after < 0 || pad_time.before < 0 ||
        pad_time.after < 0)
      throw ConfigError("conv: padding must be non-negative");
  }
};

namespace detail {

// out[to] += w * in[to * stride + offset] over every `to` whose source index
// lies inside [0, in_len).
template <typename Scalar>
inline void axpy_strided(Scalar* out, Index out_len, const Scalar* in,
                         Index in_len, Scalar w, Index stride, Index offset) {
  // Smallest to with to*stride + offset >= 0.
  Index lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  // Largest to with to*stride + offset <= in_len - 1.
  const Index last = in_len - 1 - offset;
  if (last < 0) return;
  Index hi = std::min(out_len, last / stride + 1);
  if (stride == 1) {
    const Scalar* src = in + offset;
    for (Index t = lo; t < hi; ++t) out[t] += w * src[t];
  } else {
    for (Index t = lo; t < hi; ++t) out[t] += w * in[t * stride + offset];
  }
}

}  // namespace detail

// 2-D convolution over a (C, F, T) tensor with weights shaped
// (out, in/groups, kf, kt). `bias` must be empty when spec.bias is false and
// hold out_channels values otherwise.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const ConvSpec& spec,
                      const Tensor<Scalar>& weights,
                      std::span<const Scalar> bias = {}) {
  spec.validate();
  require_rank("conv2d input", input.rank(), 3);
  require_extent("conv2d", "input channel (axis 0)", input.extent(0),
                 spec.in_channels);
  require_rank("conv2d weights", weights.rank(), 4);
  const Shape wshape = spec.weight_shape();
  static const char* kWeightAxes[] = {
      "weight out-channel (axis 0)", "weight in-channel/groups (axis 1)",
      "weight frequency kernel (axis 2)", "weight time kernel (axis 3)"};
  for (Index a = 0; a < 4; ++a)
    require_extent("conv2d", kWeightAxes[a], weights.extent(a), wshape[a]);
  if (spec.bias) {
    require_extent("conv2d", "bias", static_cast<Index>(bias.size()),
                   spec.out_channels);
  } else if (!bias.empty()) {
    throw ConfigError("conv2d: bias supplied but spec.bias is false");
  }

  const Index in_f = input.extent(1);
  const Index in_t = input.extent(2);
  const Index out_f = spec.output_freq(in_f);
  const Index out_t = spec.output_time(in_t);
  if (out_f <= 0)
    throw DimensionError("conv2d: frequency axis (axis 1) of extent " +
                         std::to_string(in_f) + " too short for kernel");
  if (out_t <= 0)
    throw DimensionError("conv2d: time axis (axis 2) of extent " +
                         std::to_string(in_t) + " too short for kernel");

  Tensor<Scalar> out({spec.out_channels, out_f, out_t});

  // 1x1 dense projection: one GEMM over the flattened plane.
  if (spec.groups == 1 && spec.kernel_freq == 1 && spec.kernel_time == 1 &&
      spec.stride == Stride2{} && spec.pad_freq == AxisPadding{} &&
      spec.pad_time == AxisPadding{}) {
    out.matrix(spec.out_channels).noalias() =
        weights.matrix(spec.out_channels) * input.matrix(spec.in_channels);
    if (spec.bias) {
      auto m = out.matrix(spec.out_channels);
      for (Index o = 0; o < spec.out_channels; ++o)
        m.row(o).array() += bias[static_cast<std::size_t>(o)];
    }
    return out;
  }

  const Index in_per_group = spec.in_channels / spec.groups;
  const Index out_per_group = spec.out_channels / spec.groups;
  for (Index o = 0; o < spec.out_channels; ++o) {
    const Index group = o / out_per_group;
    Scalar* plane = out.data() + o * out_f * out_t;
    if (spec.bias)
      std::fill(plane, plane + out_f * out_t,
                bias[static_cast<std::size_t>(o)]);
    for (Index icg = 0; icg < in_per_group; ++icg) {
      const Index ic = group * in_per_group + icg;
      const Scalar* src_plane = input.data() + ic * in_f * in_t;
      for (Index kf = 0; kf < spec.kernel_freq; ++kf) {
        for (Index kt = 0; kt < spec.kernel_time; ++kt) {
          const Scalar w = weights(o, icg, kf, kt);
          const Index t_offset = kt * spec.dilation.time - spec.pad_time.before;
          for (Index fo = 0; fo < out_f; ++fo) {
            const Index fi = fo * spec.stride.freq + kf * spec.dilation.freq -
                             spec.pad_freq.before;
            if (fi < 0 || fi >= in_f) continue;
            detail::axpy_strided(plane + fo * out_t, out_t,
                                 src_plane + fi * in_t, in_t, w,
                                 spec.stride.time, t_offset);
          }
        }
      }
    }
  }
  return out;
}

// 1-D convolution over a (C, L) tensor; axis 0 is the channel axis. Weights
// are shaped (out, in/groups, k). Only the time fields of `spec` apply.
template <typename Scalar>
Tensor<Scalar> conv1d(const Tensor<Scalar>& input, const ConvSpec& spec,
                      const Tensor<Scalar>& weights,
                      std::span<const Scalar> bias = {}) {
  require_rank("conv1d input", input.rank(), 2);
  require_rank("conv1d weights", weights.rank(), 3);
  if (spec.kernel_freq != 1 || spec.stride.freq != 1 ||
      spec.pad_freq != AxisPadding{})
    throw ConfigError("conv1d: frequency kernel/stride/padding must be trivial");
  const Tensor<Scalar> in3 =
      input.reshaped({input.extent(0), 1, input.extent(1)});
  const Tensor<Scalar> w4 = weights.reshaped(
      {weights.extent(0), weights.extent(1), 1, weights.extent(2)});
  Tensor<Scalar> out = conv2d(in3, spec, w4, bias);
  const Index channels = out.extent(0);
  const Index length = out.extent(2);
  return std::move(out).reshaped({channels, length});
}

// Inference-mode batch normalization. With sub_bands = S > 1 the frequency
// axis is split into S contiguous bands and each (channel, band) pair has its
// own statistics at index channel * S + band (SubSpectral Normalization).
template <typename Scalar>
struct NormParams {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector gamma;
  Vector beta;
  Vector mean;
  Vector var;
  Scalar eps = Scalar(1e-5);
  Index sub_bands = 1;

  static NormParams identity(Index size, Index sub_bands = 1) {
    NormParams p;
    p.gamma = Vector::Ones(size);
    p.beta = Vector::Zero(size);
    p.mean = Vector::Zero(size);
    p.var = Vector::Ones(size);
    p.sub_bands = sub_bands;
    return p;
  }

  Index size() const { return gamma.size(); }

  // Folded per-entry affine map y = scale * x + shift.
  std::pair<Vector, Vector> folded() const {
    Vector scale =
        gamma.array() / (var.array() + eps).sqrt();
    Vector shift = beta.array() - mean.array() * scale.array();
    return {std::move(scale), std::move(shift)};
  }
};

// Applies `params` to a (C, F, T) tensor or a (C, T) tensor (F = 1).
template <typename Scalar>
Tensor<Scalar> normalize(const Tensor<Scalar>& input,
                         const NormParams<Scalar>& params) {
  if (input.rank() != 2 && input.rank() != 3)
    throw DimensionError("normalize: rank must be 2 or 3, got " +
                         std::to_string(input.rank()));
  const Index channels = input.extent(0);
  const Index freq = input.rank() == 3 ? input.extent(1) : 1;
  const Index time = input.extent(input.rank() - 1);
  const Index bands = params.sub_bands;
  if (bands < 1 || freq % bands != 0)
    throw ConfigError("normalize: sub-band count " + std::to_string(bands) +
                      " does not divide frequency extent " +
                      std::to_string(freq));
  if (params.beta.size() != params.size() ||
      params.mean.size() != params.size() ||
      params.var.size() != params.size())
    throw DimensionError("normalize: parameter vectors differ in length");
  require_extent("normalize", "parameter (channels x sub-bands)",
                 params.size(), channels * bands);
  if ((params.var.array() < Scalar(0)).any())
    throw ParameterError("normalize: running variance must be >= 0");

  const auto [scale, shift] = params.folded();
  Tensor<Scalar> out = input;
  const Index band_rows = freq / bands;
  for (Index c = 0; c < channels; ++c) {
    for (Index f = 0; f < freq; ++f) {
      const Index k = c * bands + f / band_rows;
      Scalar* row = out.data() + (c * freq + f) * time;
      const Scalar a = scale[k];
      const Scalar b = shift[k];
      for (Index t = 0; t < time; ++t) row[t] = a * row[t] + b;
    }
  }
  return out;
}

enum class Activation { relu, swish, prelu };

// In-place activation. prelu takes one shared slope or one slope per entry
// of the last axis.
template <typename Scalar>
void activate_inplace(Tensor<Scalar>& x, Activation kind,
                      std::span<const Scalar> slope = {}) {
  auto v = x.vector().array();
  switch (kind) {
    case Activation::relu:
      v = v.max(Scalar(0));
      return;
    case Activation::swish:
      v = v / (Scalar(1) + (-v).exp());
      return;
    case Activation::prelu: {
      const Index last = x.rank() ? x.extent(x.rank() - 1) : 1;
      const Index n = static_cast<Index>(slope.size());
      if (n != 1 && n != last)
        throw DimensionError("prelu: slope length " + std::to_string(n) +
                             " must be 1 or " + std::to_string(last));
      Scalar* d = x.data();
      for (Index i = 0; i < x.size(); ++i) {
        const Scalar a = slope[static_cast<std::size_t>(n == 1 ? 0 : i % last)];
        if (d[i] < Scalar(0)) d[i] *= a;
      }
      return;
    }
  }
}

template <typename Scalar>
Tensor<Scalar> activate(Tensor<Scalar> x, Activation kind,
                        std::span<const Scalar> slope = {}) {
  activate_inplace(x, kind, slope);
  return x;
}

}  // namespace edgespot

#endif  // EDGESPOT_KERNELS_HPP_
