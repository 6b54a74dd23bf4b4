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
#include "edgespot/model.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <sstream>

#include "edgespot/error.hpp"
#include "edgespot/footprint.hpp"
#include "edgespot/weights.hpp"

namespace edgespot {
namespace {

// Floor applied before the log compression of the baseline frontend.
constexpr float kLogFloor = 1e-6f;

// Norm records are (4, N): gamma, beta, running mean, running variance.
NormParams<float> norm_from(const TensorF& t, Index sub_bands = 1) {
  const auto m = t.matrix(4);
  NormParams<float> p;
  p.gamma = m.row(0).transpose();
  p.beta = m.row(1).transpose();
  p.mean = m.row(2).transpose();
  p.var = m.row(3).transpose();
  p.sub_bands = sub_bands;
  return p;
}

Eigen::VectorXf vector_from(const TensorF& t) { return t.vector(); }

ConvSpec pointwise_spec(Index in, Index out) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

ConvSpec stem_spec(Index out, Stride2 stride) {
  ConvSpec s;
  s.in_channels = 1;
  s.out_channels = out;
  s.kernel_freq = 5;
  s.kernel_time = 5;
  s.stride = stride;
  s.pad_freq = AxisPadding::same(5);
  s.pad_time = AxisPadding::same(5);
  return s;
}

ConvSpec freq_spec(Index channels, Index stride) {
  ConvSpec s;
  s.in_channels = channels;
  s.out_channels = channels;
  s.groups = channels;
  s.kernel_freq = kBlockKernel;
  s.stride = {stride, 1};
  s.pad_freq = AxisPadding::same(kBlockKernel);
  return s;
}

// Depthwise 5x5 that collapses frequency (valid) and keeps time (same).
ConvSpec head_dw_spec(Index channels) {
  ConvSpec s;
  s.in_channels = channels;
  s.out_channels = channels;
  s.groups = channels;
  s.kernel_freq = 5;
  s.kernel_time = 5;
  s.pad_time = AxisPadding::same(5);
  s.bias = true;
  return s;
}

std::span<const float> as_span(const Eigen::VectorXf& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

ConvSpec BlockParams::temporal_spec() const {
  ConvSpec s;
  s.in_channels = out_channels;
  s.out_channels = out_channels;
  s.groups = fused ? 1 : out_channels;
  s.kernel_time = kBlockKernel;
  s.dilation = {1, time_dilation};
  s.pad_time = AxisPadding::same(kBlockKernel, time_dilation);
  return s;
}

ModelParams ModelParams::from_bundle(const WeightBundle& bundle,
                                     const ModelConfig& config) {
  if (bundle.config().variant != config.variant ||
      bundle.config().width != config.width)
    throw FormatError("weights: bundle holds " + bundle.config().label() +
                      ", expected " + config.label());
  bundle.validate();

  ModelParams p;
  p.config = config;
  p.pcen = bundle.pcen();
  Index cin = 1;
  for (const LayerSpec& layer : config.layers) {
    const Index c = config.channels(layer);
    switch (layer.kind) {
      case LayerKind::pcen:
        break;
      case LayerKind::stem_conv:
        p.stem_conv = bundle.at("stem.conv");
        p.stem_norm = norm_from(bundle.at("stem.norm"));
        cin = c;
        break;
      case LayerKind::fused_block:
      case LayerKind::block:
        for (Index b = 0; b < layer.repeat; ++b) {
          const std::string pre =
              layer.name + ".block" + std::to_string(b + 1);
          BlockParams bp;
          bp.fused = layer.kind == LayerKind::fused_block;
          bp.in_channels = cin;
          bp.out_channels = c;
          bp.freq_stride = b == 0 ? layer.stride.freq : 1;
          bp.time_dilation = layer.dilation.time;
          if (cin != c) {
            bp.transition_conv = bundle.at(pre + ".transition.conv");
            bp.transition_norm = norm_from(bundle.at(pre + ".transition.norm"));
          }
          bp.freq_conv = bundle.at(pre + ".freq.conv");
          bp.freq_norm = norm_from(bundle.at(pre + ".freq.norm"), kSubBands);
          bp.temporal_conv = bundle.at(pre + ".temporal.conv");
          bp.temporal_norm = norm_from(bundle.at(pre + ".temporal.norm"));
          if (!bp.fused) bp.pointwise = bundle.at(pre + ".pointwise.conv");
          p.blocks.push_back(std::move(bp));
          cin = c;
        }
        break;
      case LayerKind::head_dw_conv:
        p.head_dw_conv = bundle.at("head.dw.conv");
        p.head_dw_bias = vector_from(bundle.at("head.dw.bias"));
        break;
      case LayerKind::head_pw_conv:
        p.head_pw_conv = bundle.at("head.pw.conv");
        p.head_pw_norm = norm_from(bundle.at("head.pw.norm"));
        cin = c;
        break;
      case LayerKind::positional_encoding:
        p.rpe.filters = bundle.at("rpe.filters");
        p.rpe.bias = vector_from(bundle.at("rpe.bias"));
        break;
      case LayerKind::attention: {
        auto mat = [&](const char* name) -> Eigen::MatrixXf {
          return bundle.at(name).matrix();
        };
        p.attention.w_q = mat("attention.w_q");
        p.attention.w_k = mat("attention.w_k");
        p.attention.w_v = mat("attention.w_v");
        p.attention.b_q = vector_from(bundle.at("attention.b_q"));
        p.attention.b_k = vector_from(bundle.at("attention.b_k"));
        p.attention.b_v = vector_from(bundle.at("attention.b_v"));
        p.attention.prelu_slope = bundle.at("attention.prelu")[0];
        break;
      }
      case LayerKind::aggregate:
        p.attention.aggregate_weight = vector_from(bundle.at("aggregate.weight"));
        p.attention.aggregate_bias = bundle.at("aggregate.bias")[0];
        break;
      case LayerKind::pool_project:
        p.project_weight = bundle.at("project.weight").matrix();
        p.project_bias = vector_from(bundle.at("project.bias"));
        break;
    }
  }
  return p;
}

namespace {

// Norm step used for inference: fixed running statistics.
struct ApplyNorm {
  void operator()(std::vector<TensorF>& xs, const NormParams<float>& p) {
    for (TensorF& x : xs) x = normalize(x, p);
  }
};

// Norm step used for calibration: the running statistics are replaced by the
// statistics of the batch (per channel and sub-band), then applied.
struct CalibrateNorm {
  std::vector<const NormParams<float>*> visited;

  void operator()(std::vector<TensorF>& xs, NormParams<float>& p) {
    const Index entries = p.size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(entries);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(entries);
    double count = 0.0;
    for (const TensorF& x : xs) {
      const Index channels = x.extent(0);
      const Index freq = x.rank() == 3 ? x.extent(1) : 1;
      const Index time = x.extent(x.rank() - 1);
      const Index band_rows = freq / p.sub_bands;
      for (Index c = 0; c < channels; ++c)
        for (Index f = 0; f < freq; ++f) {
          const Index k = c * p.sub_bands + f / band_rows;
          const float* row = x.data() + (c * freq + f) * time;
          for (Index t = 0; t < time; ++t) {
            sum[k] += row[t];
            sq[k] += static_cast<double>(row[t]) * row[t];
          }
        }
      count += static_cast<double>(x.size()) / static_cast<double>(entries);
    }
    if (count <= 0.0) throw ConfigError("calibrate_norms: empty batch");
    const Eigen::VectorXd mean = sum / count;
    const Eigen::VectorXd var =
        (sq / count - mean.cwiseAbs2()).cwiseMax(0.0);
    p.mean = mean.cast<float>();
    p.var = var.cast<float>();
    visited.push_back(&p);
    ApplyNorm{}(xs, p);
  }
};

template <typename Block, typename NormFn>
std::vector<TensorF> block_forward(std::vector<TensorF> xs, Block& p,
                                   NormFn& norm) {
  for (const TensorF& x : xs) {
    require_rank("bc_resblock", x.rank(), 3);
    require_extent("bc_resblock", "input channel (axis 0)", x.extent(0),
                   p.in_channels);
  }
  const Index c = p.out_channels;
  if (!p.transition_conv && p.in_channels != c)
    throw DimensionError("bc_resblock: channel change " +
                         std::to_string(p.in_channels) + " -> " +
                         std::to_string(c) + " requires a transition conv");

  // f2: [1x1 projection ->] frequency-depthwise conv -> sub-spectral norm.
  std::vector<TensorF> outs;
  outs.reserve(xs.size());
  if (p.transition_conv) {
    std::vector<TensorF> projected;
    for (const TensorF& x : xs)
      projected.push_back(
          conv2d(x, pointwise_spec(p.in_channels, c), *p.transition_conv));
    norm(projected, p.transition_norm);
    for (TensorF& y : projected) {
      activate_inplace(y, Activation::relu);
      outs.push_back(conv2d(y, freq_spec(c, p.freq_stride), p.freq_conv));
    }
  } else {
    for (const TensorF& x : xs)
      outs.push_back(conv2d(x, freq_spec(c, p.freq_stride), p.freq_conv));
  }
  norm(outs, p.freq_norm);

  // Temporal path on the frequency average.
  std::vector<TensorF> temporal;
  for (const TensorF& out : outs) {
    const Index freq = out.extent(1);
    const Index time = out.extent(2);
    TensorF pooled({c, 1, time});
    for (Index ch = 0; ch < c; ++ch) {
      float* dst = pooled.data() + ch * time;
      for (Index f = 0; f < freq; ++f) {
        const float* row = out.data() + (ch * freq + f) * time;
        for (Index t = 0; t < time; ++t) dst[t] += row[t];
      }
      for (Index t = 0; t < time; ++t) dst[t] /= static_cast<float>(freq);
    }
    temporal.push_back(conv2d(pooled, p.temporal_spec(), p.temporal_conv));
  }
  norm(temporal, p.temporal_norm);

  for (std::size_t i = 0; i < outs.size(); ++i) {
    TensorF& out = outs[i];
    TensorF& tp = temporal[i];
    activate_inplace(tp, Activation::swish);
    if (p.pointwise) tp = conv2d(tp, pointwise_spec(c, c), *p.pointwise);

    // Broadcast back over frequency, add the 2-D residuals.
    if (!p.transition() && xs[i].shape() != out.shape())
      throw DimensionError("bc_resblock: residual shape " +
                           shape_string(xs[i].shape()) +
                           " does not match branch " +
                           shape_string(out.shape()));
    const Index freq = out.extent(1);
    const Index time = out.extent(2);
    for (Index ch = 0; ch < c; ++ch) {
      const float* b = tp.data() + ch * time;
      for (Index f = 0; f < freq; ++f) {
        float* row = out.data() + (ch * freq + f) * time;
        for (Index t = 0; t < time; ++t) row[t] += b[t];
      }
    }
    if (!p.transition()) out.vector() += xs[i].vector();
    activate_inplace(out, Activation::relu);
  }
  return outs;
}

}  // namespace

TensorF bc_resblock(const TensorF& x, const BlockParams& p) {
  ApplyNorm norm;
  std::vector<TensorF> xs;
  xs.push_back(x);
  return std::move(block_forward(std::move(xs), p, norm).front());
}

TensorF rpe(const TensorF& x, const RpeParams& p) {
  require_rank("rpe", x.rank(), 2);
  const Index channels = x.extent(0);
  require_extent("rpe", "filter channel (axis 0)", p.filters.extent(0),
                 channels);
  ConvSpec s;
  s.in_channels = channels;
  s.out_channels = channels;
  s.groups = channels;
  s.kernel_time = p.filters.extent(1);
  s.pad_time = p.pad;
  s.bias = true;
  const TensorF w = p.filters.reshaped({channels, 1, p.filters.extent(1)});
  TensorF out = conv1d(x, s, w, as_span(p.bias));
  require_extent("rpe", "output time (axis 1)", out.extent(1), x.extent(1));
  out.vector() += x.vector();
  return out;
}

TensorF sdpa(const TensorF& x, const AttentionParams& p,
             Eigen::MatrixXf* attention) {
  require_rank("sdpa", x.rank(), 2);
  const Index steps = x.extent(0);
  const Index features = x.extent(1);
  require_extent("sdpa", "W_Q input (axis 0)", p.w_q.rows(), features);
  require_extent("sdpa", "W_K input (axis 0)", p.w_k.rows(), features);
  require_extent("sdpa", "W_V input (axis 0)", p.w_v.rows(), features);
  const Index d = p.w_q.cols();
  if (p.w_k.cols() != d || p.w_v.cols() != d || p.b_q.size() != d ||
      p.b_k.size() != d || p.b_v.size() != d)
    throw DimensionError("sdpa: projection widths disagree");

  const auto in = x.matrix();
  const Eigen::MatrixXf q = (in * p.w_q).rowwise() + p.b_q.transpose();
  const Eigen::MatrixXf k = (in * p.w_k).rowwise() + p.b_k.transpose();
  const Eigen::MatrixXf v = (in * p.w_v).rowwise() + p.b_v.transpose();

  Eigen::MatrixXf a = (q * k.transpose()) / std::sqrt(static_cast<float>(d));
  if (!a.allFinite())
    throw NumericError("sdpa: non-finite attention logits");
  for (Index i = 0; i < steps; ++i) {
    auto row = a.row(i);
    row = (row.array() - row.maxCoeff()).exp().matrix();
    row /= row.sum();
  }

  TensorF z({steps, d});
  z.matrix().noalias() = a * v;
  const float slope = p.prelu_slope;
  activate_inplace(z, Activation::prelu, std::span<const float>(&slope, 1));
  if (attention) *attention = std::move(a);
  return z;
}

Embedding aggregate(const TensorF& z, const AttentionParams& p) {
  require_rank("aggregate", z.rank(), 2);
  const Index steps = z.extent(0);
  require_extent("aggregate", "weight (time channels)",
                 p.aggregate_weight.size(), steps);
  ConvSpec s;
  s.in_channels = steps;
  s.out_channels = 1;
  s.bias = true;
  const TensorF w({1, steps, 1},
                  std::vector<float>(p.aggregate_weight.data(),
                                     p.aggregate_weight.data() + steps));
  const float bias = p.aggregate_bias;
  const TensorF out = conv1d(z, s, w, std::span<const float>(&bias, 1));
  return out.vector();
}

namespace {

// Runs the graph on a batch of spectrograms. `trace` is only filled for a
// single input.
template <typename Params, typename NormFn>
std::vector<Embedding> forward(std::span<const MelSpectrogram> mels,
                               Params& p, NormFn& norm, ShapeTrace* trace) {
  const ModelConfig& cfg = p.config;
  std::vector<TensorF> xs;
  for (const MelSpectrogram& mel : mels) {
    require_extent("embed", "mel bands", mel.bands(), kMelBands);
    require_extent("embed", "mel frames", mel.frames(), kFrames);
    TensorF x = mel.energies().reshaped({1, kMelBands, kFrames});
    if (!cfg.has(LayerKind::pcen))
      x.vector() = (x.vector().array() + kLogFloor).log().matrix();
    xs.push_back(std::move(x));
  }
  if (mels.size() != 1) trace = nullptr;

  std::optional<Footprint> fp;
  if (trace) fp = footprint(cfg);
  auto record = [&](const LayerSpec& layer, const Shape& in,
                    const Shape& out) {
    if (!trace) return;
    trace->push_back({layer.name, in, out, fp->group_params(layer.name),
                      fp->group_macs(layer.name)});
  };

  std::size_t block = 0;
  std::vector<Embedding> es(xs.size());
  for (const LayerSpec& layer : cfg.layers) {
    const Shape in = xs.empty() ? Shape{} : xs.front().shape();
    const Index c = cfg.channels(layer);
    switch (layer.kind) {
      case LayerKind::pcen:
        if (!p.pcen) throw FormatError("weights: missing record 'pcen'");
        for (TensorF& x : xs) {
          const TensorF plane = x.reshaped({kMelBands, kFrames});
          x = pcen(plane, *p.pcen).reshaped({1, kMelBands, kFrames});
        }
        break;
      case LayerKind::stem_conv:
        for (TensorF& x : xs) x = conv2d(x, stem_spec(c, layer.stride), p.stem_conv);
        norm(xs, p.stem_norm);
        for (TensorF& x : xs) activate_inplace(x, Activation::relu);
        break;
      case LayerKind::fused_block:
      case LayerKind::block:
        for (Index b = 0; b < layer.repeat; ++b)
          xs = block_forward(std::move(xs), p.blocks.at(block++), norm);
        break;
      case LayerKind::head_dw_conv:
        for (TensorF& x : xs)
          x = conv2d(x, head_dw_spec(x.extent(0)), p.head_dw_conv,
                     as_span(p.head_dw_bias));
        break;
      case LayerKind::head_pw_conv:
        for (TensorF& x : xs)
          x = conv2d(x, pointwise_spec(x.extent(0), c), p.head_pw_conv);
        norm(xs, p.head_pw_norm);
        for (TensorF& x : xs) {
          activate_inplace(x, Activation::relu);
          require_extent("embed", "head frequency (axis 1)", x.extent(1), 1);
          x = std::move(x).reshaped({c, x.extent(2)});
        }
        break;
      case LayerKind::positional_encoding:
        for (TensorF& x : xs) x = rpe(x, p.rpe);
        break;
      case LayerKind::attention:
        for (TensorF& x : xs) {
          // Time-major view: one feature vector per frame.
          TensorF seq({x.extent(1), x.extent(0)});
          seq.matrix() = x.matrix().transpose();
          x = sdpa(seq, p.attention);
        }
        if (!xs.empty())
          record(layer, {in[1], in[0]}, xs.front().shape());
        continue;
      case LayerKind::aggregate:
        for (std::size_t i = 0; i < xs.size(); ++i)
          es[i] = aggregate(xs[i], p.attention);
        record(layer, in, {1, kEmbeddingDim});
        continue;
      case LayerKind::pool_project:
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const Eigen::VectorXf pooled = xs[i].matrix().rowwise().mean();
          es[i] = p.project_weight * pooled + p.project_bias;
        }
        record(layer, in, {kEmbeddingDim});
        continue;
    }
    if (!xs.empty()) record(layer, in, xs.front().shape());
  }
  for (const Embedding& e : es)
    if (e.size() != kEmbeddingDim || !e.allFinite())
      throw NumericError("embed: embedding is not a finite 64-vector");
  return es;
}

}  // namespace

Embedding embed(const MelSpectrogram& mel, const ModelParams& p,
                ShapeTrace* trace) {
  ApplyNorm norm;
  return std::move(forward(std::span(&mel, 1), p, norm, trace).front());
}

std::vector<Embedding> embed_batch(std::span<const MelSpectrogram> mels,
                                   const ModelParams& params) {
  ApplyNorm norm;
  return forward(mels, params, norm, nullptr);
}

void calibrate_norms(ModelParams& params,
                     std::span<const MelSpectrogram> pool) {
  if (pool.empty()) throw ConfigError("calibrate_norms: empty clip pool");
  CalibrateNorm norm;
  forward(pool, params, norm, nullptr);
}

WeightBundle calibrate_norms(const WeightBundle& bundle,
                             std::span<const MelSpectrogram> pool) {
  if (pool.empty()) throw ConfigError("calibrate_norms: empty clip pool");
  ModelParams params = ModelParams::from_bundle(bundle, bundle.config());
  CalibrateNorm norm;
  forward(pool, params, norm, nullptr);

  // Norms are visited in the same order as the layout lists them.
  WeightBundle out = bundle;
  std::size_t i = 0;
  for (const WeightSpec& spec : weight_layout(bundle.config())) {
    if (spec.role != WeightRole::norm) continue;
    if (i >= norm.visited.size())
      throw ConfigError("calibrate_norms: norm layout mismatch");
    TensorF t = bundle.at(spec.name);
    auto m = t.matrix(4);
    m.row(2) = norm.visited[i]->mean.transpose();
    m.row(3) = norm.visited[i]->var.transpose();
    out.set(spec.name, std::move(t));
    ++i;
  }
  if (i != norm.visited.size())
    throw ConfigError("calibrate_norms: norm layout mismatch");
  return out;
}

Embedding embed(const MelSpectrogram& mel, const ModelConfig& config,
                const WeightBundle& bundle) {
  return embed(mel, ModelParams::from_bundle(bundle, config));
}

std::string format_trace(const ShapeTrace& trace) {
  std::ostringstream os;
  for (const TraceRow& r : trace)
    os << r.layer << ' ' << shape_string(r.in) << " -> " << shape_string(r.out)
       << ' ' << r.params << ' ' << r.macs << '\n';
  return os.str();
}

}  // namespace edgespot
