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
#ifndef EDGESPOT_MODEL_HPP_
#define EDGESPOT_MODEL_HPP_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "edgespot/frontend.hpp"
#include "edgespot/kernels.hpp"
#include "edgespot/tensor.hpp"

namespace edgespot {

class WeightBundle;

inline constexpr Index kEmbeddingDim = 64;
inline constexpr Index kRpeKernel = 16;
inline constexpr Index kSubBands = 5;
inline constexpr Index kBlockKernel = 3;

// Utterance embedding, always kEmbeddingDim long.
using Embedding = Eigen::VectorXf;

enum class Variant { edgespot, bcresnet };

std::string_view to_string(Variant v);
// Accepts "edgespot" and "bcresnet" / "bcresnet-baseline".
Variant parse_variant(std::string_view name);

enum class LayerKind {
  pcen,
  stem_conv,
  fused_block,
  block,
  head_dw_conv,
  head_pw_conv,
  positional_encoding,
  attention,
  aggregate,
  pool_project,
};

// One row of the architecture table. `channels` is the width at tau = 1.
struct LayerSpec {
  LayerKind kind;
  std::string name;
  std::string op;
  Index repeat = 1;
  Index channels = 0;
  Stride2 stride;
  Dilation2 dilation;
};

struct ModelConfig {
  Variant variant = Variant::edgespot;
  int width = 1;
  std::vector<LayerSpec> layers;

  static ModelConfig make(Variant variant, int width);

  // tau * c, except the aggregation conv1d (always 1) and the baseline
  // projection (always the embedding size).
  Index channels(const LayerSpec& layer) const;
  const LayerSpec& layer(LayerKind kind) const;
  bool has(LayerKind kind) const;
  void validate() const;
  std::string label() const;  // e.g. "edgespot-4"
};

// One broadcasted-residual block. Transition blocks (channel change or
// frequency stride) have no identity shortcut; the 1x1 projection exists
// only when the channel count changes.
struct BlockParams {
  bool fused = false;
  Index in_channels = 0;
  Index out_channels = 0;
  Index freq_stride = 1;
  Index time_dilation = 1;

  std::optional<TensorF> transition_conv;  // (out, in, 1, 1)
  NormParams<float> transition_norm;
  TensorF freq_conv;  // (out, 1, 3, 1), depthwise
  NormParams<float> freq_norm;  // sub-spectral, out * kSubBands entries
  // Standard: depthwise (out, 1, 1, 3). Fused: regular (out, out, 1, 3).
  TensorF temporal_conv;
  NormParams<float> temporal_norm;
  std::optional<TensorF> pointwise;  // (out, out, 1, 1); absent when fused

  bool transition() const {
    return in_channels != out_channels || freq_stride != 1;
  }
  ConvSpec temporal_spec() const;
};

struct RpeParams {
  TensorF filters;  // (C, kRpeKernel)
  Eigen::VectorXf bias;
  AxisPadding pad = AxisPadding::same(kRpeKernel);  // 8 left, 7 right
};

struct AttentionParams {
  Eigen::MatrixXf w_q, w_k, w_v;  // (C, 64)
  Eigen::VectorXf b_q, b_k, b_v;  // (64)
  float prelu_slope = 0.25f;
  // Temporal aggregation head: conv1d with kernel 1 mapping T -> 1 channel.
  Eigen::VectorXf aggregate_weight;  // (T)
  float aggregate_bias = 0.0f;
};

// Typed, validated view of a weight bundle for one configuration.
struct ModelParams {
  ModelConfig config;
  std::optional<PcenParams> pcen;
  TensorF stem_conv;
  NormParams<float> stem_norm;
  std::vector<BlockParams> blocks;
  TensorF head_dw_conv;
  Eigen::VectorXf head_dw_bias;
  TensorF head_pw_conv;
  NormParams<float> head_pw_norm;
  RpeParams rpe;              // edgespot only
  AttentionParams attention;  // edgespot only
  Eigen::MatrixXf project_weight;  // baseline only, (64, C)
  Eigen::VectorXf project_bias;

  static ModelParams from_bundle(const WeightBundle& bundle,
                                 const ModelConfig& config);
};

TensorF bc_resblock(const TensorF& x, const BlockParams& p);

// x + depthwise_conv(x) along time, length preserving.
TensorF rpe(const TensorF& x, const RpeParams& p);

// Single-head self-attention over the rows of a (T, C) input, followed by
// PReLU. Optionally returns the (T, T) attention matrix.
TensorF sdpa(const TensorF& x, const AttentionParams& p,
             Eigen::MatrixXf* attention = nullptr);

// (T, 64) -> 64 via a kernel-1 conv1d that treats time as channels.
Embedding aggregate(const TensorF& z, const AttentionParams& p);

struct TraceRow {
  std::string layer;
  Shape in;
  Shape out;
  Index params = 0;
  Index macs = 0;
};
using ShapeTrace = std::vector<TraceRow>;

// Runs the full graph. When `trace` is given, one row per architecture table
// entry is appended with its input/output shape and footprint.
Embedding embed(const MelSpectrogram& mel, const ModelParams& params,
                ShapeTrace* trace = nullptr);
Embedding embed(const MelSpectrogram& mel, const ModelConfig& config,
                const WeightBundle& bundle);
std::vector<Embedding> embed_batch(std::span<const MelSpectrogram> mels,
                                   const ModelParams& params);

// Replaces every norm's running mean and variance with the statistics
// measured over `pool`, layer by layer. Weights, gamma and beta are kept.
// Needs no labels.
void calibrate_norms(ModelParams& params, std::span<const MelSpectrogram> pool);
WeightBundle calibrate_norms(const WeightBundle& bundle,
                             std::span<const MelSpectrogram> pool);

// "layer-name in-shape -> out-shape params macs" per row.
std::string format_trace(const ShapeTrace& trace);

}  // namespace edgespot

#endif  // EDGESPOT_MODEL_HPP_
