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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgespot/error.hpp"
#include "edgespot/model.hpp"
#include "edgespot/weights.hpp"
#include "oracles.hpp"

using namespace edgespot;

namespace {

NormParams<float> unit_norm(Index channels, Index bands = 1) {
  auto n = NormParams<float>::identity(channels * bands, bands);
  n.eps = 0;
  return n;
}

NormParams<float> random_norm(Index n, std::mt19937_64& rng, Index bands = 1) {
  std::uniform_real_distribution<float> u(0.5f, 1.5f), v(-0.3f, 0.3f);
  NormParams<float> p = NormParams<float>::identity(n * bands, bands);
  for (Index i = 0; i < n * bands; ++i) {
    p.gamma[i] = u(rng);
    p.beta[i] = v(rng);
    p.mean[i] = v(rng);
    p.var[i] = u(rng);
  }
  return p;
}

Eigen::MatrixXf random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1, 1);
  Eigen::MatrixXf m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

AttentionParams random_attention(Index c, Index d, std::mt19937_64& rng) {
  AttentionParams p;
  p.w_q = random_matrix(c, d, rng);
  p.w_k = random_matrix(c, d, rng);
  p.w_v = random_matrix(c, d, rng);
  p.b_q = random_matrix(d, 1, rng);
  p.b_k = random_matrix(d, 1, rng);
  p.b_v = random_matrix(d, 1, rng);
  p.prelu_slope = 0.2f;
  return p;
}

MelSpectrogram random_mel(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return MelSpectrogram(oracle::random_tensor({40, 101}, rng, 0.0, 2.0));
}

double rel_err(const Embedding& e, const std::vector<double>& ref) {
  REQUIRE(e.size() == static_cast<Index>(ref.size()));
  double num = 0, den = 0;
  for (Index i = 0; i < e.size(); ++i) {
    num += (e[i] - ref[i]) * (e[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num / std::max(den, 1e-30));
}

}  // namespace

TEST_CASE("non-transition block with zero branches is relu of the input") {
  std::mt19937_64 rng(1);
  BlockParams p;
  p.in_channels = p.out_channels = 3;
  p.freq_conv = TensorF({3, 1, 3, 1});
  p.freq_norm = unit_norm(3, kSubBands);
  p.temporal_conv = TensorF({3, 1, 1, 3});
  p.temporal_norm = unit_norm(3);
  p.pointwise = TensorF({3, 3, 1, 1});
  const TensorF x = oracle::random_tensor({3, 10, 12}, rng);
  CHECK(bc_resblock(x, p) == activate(x, Activation::relu));
}

TEST_CASE("stage-2 transition block maps 8x20x101 to 12x10x101") {
  const ModelConfig cfg = ModelConfig::make(Variant::edgespot, 1);
  const ModelParams mp = ModelParams::from_bundle(random_bundle(cfg, 1), cfg);
  const BlockParams& b = mp.blocks.at(2);
  CHECK(b.transition());
  CHECK(b.fused);
  std::mt19937_64 rng(2);
  CHECK(bc_resblock(oracle::random_tensor({8, 20, 101}, rng), b).shape() ==
        Shape{12, 10, 101});
  CHECK_THROWS_AS(bc_resblock(oracle::random_tensor({9, 20, 101}, rng), b),
                  DimensionError);
}

TEST_CASE("fused block equals standard block with block-diagonal kernel") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index c = 2;
    BlockParams standard;
    standard.in_channels = standard.out_channels = c;
    standard.time_dilation = 1 + trial % 3;
    standard.freq_conv = oracle::random_tensor({c, 1, 3, 1}, rng);
    standard.freq_norm = random_norm(c, rng);
    standard.temporal_conv = oracle::random_tensor({c, 1, 1, 3}, rng);
    standard.temporal_norm = random_norm(c, rng);
    TensorF eye({c, c, 1, 1});
    for (Index i = 0; i < c; ++i) eye(i, i, 0, 0) = 1.0f;
    standard.pointwise = eye;

    BlockParams fused = standard;
    fused.fused = true;
    fused.pointwise.reset();
    fused.temporal_conv = TensorF({c, c, 1, 3});
    for (Index o = 0; o < c; ++o)
      for (Index k = 0; k < 3; ++k)
        fused.temporal_conv(o, o, 0, k) = standard.temporal_conv(o, 0, 0, k);

    const TensorF x = oracle::random_tensor({c, 4, 8}, rng);
    const TensorF a = bc_resblock(x, standard);
    const TensorF b = bc_resblock(x, fused);
    for (Index i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-5);
  }
}

TEST_CASE("block matches the double-precision oracle") {
  std::mt19937_64 rng(4);
  const ModelConfig cfg = ModelConfig::make(Variant::bcresnet, 2);
  const WeightBundle bundle = random_bundle(cfg, 4);
  const ModelParams mp = ModelParams::from_bundle(bundle, cfg);
  // stage3.block1: channel change, stride 2, standard temporal path.
  const BlockParams& b = mp.blocks.at(4);
  REQUIRE(b.transition());
  const TensorF x = oracle::random_tensor({24, 10, 101}, rng);
  const TensorF y = bc_resblock(x, b);

  const std::string p = "stage3.block1";
  auto rec = [&](const std::string& n) { return oracle::doubles(bundle.at(n)); };
  oracle::Volume v = oracle::conv2d(oracle::from_tensor(x), oracle::Conv{32},
                                    rec(p + ".transition.conv"));
  oracle::normalize(v, rec(p + ".transition.norm"), 1);
  for (double& e : v.v) e = oracle::relu(e);
  oracle::Volume f2 = oracle::conv2d(
      v, oracle::Conv{32, 32, 3, 1, 2, 1, 1, 1, 1, 1, 0, 0}, rec(p + ".freq.conv"));
  oracle::normalize(f2, rec(p + ".freq.norm"), 5);
  oracle::Volume avg(32, 1, 101);
  for (Index c = 0; c < 32; ++c)
    for (Index t = 0; t < 101; ++t) {
      for (Index f = 0; f < 5; ++f) avg.at(c, 0, t) += f2.at(c, f, t) / 5.0;
    }
  oracle::Volume tp = oracle::conv2d(
      avg, oracle::Conv{32, 32, 1, 3, 1, 1, 1, 4, 0, 0, 4, 4},
      rec(p + ".temporal.conv"));
  oracle::normalize(tp, rec(p + ".temporal.norm"), 1);
  for (double& e : tp.v) e = oracle::swish(e);
  tp = oracle::conv2d(tp, oracle::Conv{32}, rec(p + ".pointwise.conv"));
  REQUIRE(y.shape() == Shape{32, 5, 101});
  for (Index c = 0; c < 32; ++c)
    for (Index f = 0; f < 5; ++f)
      for (Index t = 0; t < 101; ++t)
        CHECK(y(c, f, t) ==
              doctest::Approx(oracle::relu(f2.at(c, f, t) + tp.at(c, 0, t)))
                  .epsilon(1e-4)
                  .scale(1.0));
}

TEST_CASE("rpe examples") {
  std::mt19937_64 rng(5);
  const TensorF x = oracle::random_tensor({3, 20}, rng);
  RpeParams p;
  p.filters = TensorF({3, kRpeKernel});
  p.bias = Eigen::VectorXf::Zero(3);
  CHECK(rpe(x, p) == x);

  for (Index c = 0; c < 3; ++c) p.filters(c, 8) = 1.0f;
  const TensorF y = rpe(x, p);
  for (Index i = 0; i < x.size(); ++i) CHECK(y[i] == 2 * x[i]);
}

TEST_CASE("rpe matches the sliding-window oracle") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Index steps = trial == 0 ? 8 : 1 + trial % 30;
    const TensorF x = oracle::random_tensor({3, steps}, rng);
    RpeParams p;
    p.filters = oracle::random_tensor({3, kRpeKernel}, rng);
    p.bias = random_matrix(3, 1, rng);
    const TensorF y = rpe(x, p);
    REQUIRE(y.shape() == x.shape());
    for (Index c = 0; c < 3; ++c)
      for (Index t = 0; t < steps; ++t) {
        double acc = x(c, t) + double(p.bias[c]);
        for (Index k = 0; k < kRpeKernel; ++k) {
          const Index src = t + k - 8;
          if (src >= 0 && src < steps) acc += double(p.filters(c, k)) * x(c, src);
        }
        CHECK(std::abs(y(c, t) - acc) < 1e-5);
      }
  }
}

TEST_CASE("rpe breaks time-reversal symmetry") {
  std::mt19937_64 rng(7);
  int broken = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const TensorF x = oracle::random_tensor({4, 12}, rng);
    RpeParams p;
    p.filters = oracle::random_tensor({4, kRpeKernel}, rng);
    p.bias = Eigen::VectorXf::Zero(4);
    TensorF rev = x;
    for (Index c = 0; c < 4; ++c)
      for (Index t = 0; t < 12; ++t) rev(c, t) = x(c, 11 - t);
    const TensorF a = rpe(x, p), b = rpe(rev, p);
    double diff = 0;
    for (Index c = 0; c < 4; ++c)
      for (Index t = 0; t < 12; ++t)
        diff = std::max(diff, double(std::abs(a(c, t) - b(c, 11 - t))));
    broken += diff > 1e-3;
  }
  CHECK(broken == 50);
}

TEST_CASE("sdpa rows sum to one for every length") {
  std::mt19937_64 rng(8);
  const AttentionParams p = random_attention(6, 64, rng);
  for (Index steps : {1, 2, 7, 50, 101}) {
    Eigen::MatrixXf a;
    const TensorF z = sdpa(oracle::random_tensor({steps, 6}, rng), p, &a);
    CHECK(z.shape() == Shape{steps, 64});
    for (Index i = 0; i < steps; ++i) CHECK(std::abs(a.row(i).sum() - 1) < 1e-6);
    CHECK(a.minCoeff() >= 0.0f);
  }
}

TEST_CASE("sdpa with a single step returns prelu of V") {
  std::mt19937_64 rng(9);
  const AttentionParams p = random_attention(5, 64, rng);
  const TensorF x = oracle::random_tensor({1, 5}, rng);
  Eigen::MatrixXf a;
  const TensorF z = sdpa(x, p, &a);
  CHECK(a(0, 0) == 1.0f);
  const Eigen::VectorXf v = p.w_v.transpose() * x.matrix().transpose() + p.b_v;
  for (Index d = 0; d < 64; ++d) {
    const float want = v[d] < 0 ? p.prelu_slope * v[d] : v[d];
    CHECK(z[d] == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("identical keys give uniform attention") {
  std::mt19937_64 rng(10);
  AttentionParams p = random_attention(4, 64, rng);
  p.w_k.setZero();
  p.prelu_slope = 1.0f;  // linear, so Z rows equal the mean of V rows
  const TensorF x = oracle::random_tensor({9, 4}, rng);
  Eigen::MatrixXf a;
  const TensorF z = sdpa(x, p, &a);
  CHECK(((a.array() - 1.0f / 9).abs() < 1e-6f).all());
  const Eigen::MatrixXf v = (x.matrix() * p.w_v).rowwise() + p.b_v.transpose();
  const Eigen::RowVectorXf mean = v.colwise().mean();
  for (Index t = 0; t < 9; ++t)
    for (Index d = 0; d < 64; ++d) CHECK(std::abs(z(t, d) - mean[d]) < 1e-5);
}

TEST_CASE("sdpa on a 2x2 toy matches hand computation") {
  AttentionParams p;
  p.w_q = Eigen::Matrix2f::Identity();
  p.w_k = Eigen::Matrix2f::Identity();
  p.w_v = Eigen::Matrix2f{{1, 2}, {3, 4}};
  p.b_q = p.b_k = p.b_v = Eigen::Vector2f::Zero();
  p.prelu_slope = 0.5f;
  const TensorF x({2, 2}, std::vector<float>{1, 0, 0, 1});
  Eigen::MatrixXf a;
  const TensorF z = sdpa(x, p, &a);
  // Logits [[1, 0], [0, 1]] / sqrt(2); V = W_V.
  const double e = std::exp(1 / std::sqrt(2.0));
  const double hi = e / (e + 1), lo = 1 / (e + 1);
  CHECK(a(0, 0) == doctest::Approx(hi).epsilon(1e-6));
  CHECK(a(0, 1) == doctest::Approx(lo).epsilon(1e-6));
  CHECK(z(0, 0) == doctest::Approx(hi * 1 + lo * 3).epsilon(1e-6));
  CHECK(z(0, 1) == doctest::Approx(hi * 2 + lo * 4).epsilon(1e-6));
  CHECK(z(1, 0) == doctest::Approx(lo * 1 + hi * 3).epsilon(1e-6));
  CHECK(z(1, 1) == doctest::Approx(lo * 2 + hi * 4).epsilon(1e-6));

  p.w_v = -p.w_v;
  const TensorF neg = sdpa(x, p);
  CHECK(neg(0, 0) == doctest::Approx(-0.5 * (hi + 3 * lo)).epsilon(1e-6));
}

TEST_CASE("sdpa is permutation covariant") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const AttentionParams p = random_attention(5, 64, rng);
    const TensorF x = oracle::random_tensor({8, 5}, rng);
    std::vector<Index> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    TensorF xp = x;
    for (Index t = 0; t < 8; ++t)
      for (Index c = 0; c < 5; ++c) xp(t, c) = x(perm[t], c);
    const TensorF z = sdpa(x, p), zp = sdpa(xp, p);
    double worst = 0;
    for (Index t = 0; t < 8; ++t)
      for (Index d = 0; d < 64; ++d)
        worst = std::max(worst, double(std::abs(zp(t, d) - z(perm[t], d))));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("sdpa rejects non-finite logits") {
  std::mt19937_64 rng(12);
  AttentionParams p = random_attention(2, 4, rng);
  p.w_q *= 1e30f;
  p.w_k *= 1e30f;
  CHECK_THROWS_AS(sdpa(oracle::random_tensor({3, 2}, rng), p), NumericError);
}

TEST_CASE("shape trace reproduces the architecture table") {
  const ModelConfig cfg = ModelConfig::make(Variant::edgespot, 1);
  ShapeTrace trace;
  const Embedding e =
      embed(random_mel(1), ModelParams::from_bundle(random_bundle(cfg, 1), cfg),
            &trace);
  CHECK(e.size() == 64);
  CHECK(e.allFinite());
  const std::vector<Shape> inputs = {
      {1, 40, 101}, {1, 40, 101}, {16, 20, 101}, {8, 20, 101},
      {12, 10, 101}, {16, 5, 101}, {20, 5, 101}, {20, 1, 101},
      {32, 101}, {101, 32}, {101, 64}};
  REQUIRE(trace.size() == inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) CHECK(trace[i].in == inputs[i]);
  CHECK(trace.back().out == Shape{1, 64});
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    Shape next = trace[i + 1].in;
    // The attention row is listed time-major.
    if (trace[i + 1].layer == "attention") std::swap(next[0], next[1]);
    CHECK(trace[i].out == next);
  }
}

TEST_CASE("every width keeps tau * c channels and 101 frames") {
  for (int tau = 1; tau <= 4; ++tau) {
    for (Variant v : {Variant::edgespot, Variant::bcresnet}) {
      const ModelConfig cfg = ModelConfig::make(v, tau);
      ShapeTrace trace;
      const Embedding e = embed(
          random_mel(tau), ModelParams::from_bundle(random_bundle(cfg, tau), cfg),
          &trace);
      CHECK(e.size() == kEmbeddingDim);
      CHECK(e.allFinite());
      for (const TraceRow& row : trace) {
        if (row.layer == "aggregate" || row.layer == "project") continue;
        CHECK(std::find(row.out.begin(), row.out.end(), 101) != row.out.end());
      }
      const Index widths[] = {16, 8, 12, 16, 20, 20, 32, 32};
      // The baseline has no positional encoding row.
      const std::size_t rows = v == Variant::edgespot ? 8 : 7;
      for (std::size_t i = 0; i < rows; ++i) {
        const TraceRow& row = trace[i + (v == Variant::edgespot ? 1 : 0)];
        CHECK(row.out[0] == widths[i] * tau);
      }
    }
  }
}

TEST_CASE("embed matches the double-precision network oracle") {
  for (Variant v : {Variant::edgespot, Variant::bcresnet}) {
    for (int tau : {1, 2}) {
      const ModelConfig cfg = ModelConfig::make(v, tau);
      const WeightBundle raw = random_bundle(cfg, 17 + tau);
      // Calibrated statistics keep activations spread so the comparison
      // exercises every layer rather than a saturated constant.
      std::vector<MelSpectrogram> pool;
      for (std::uint64_t s = 0; s < 4; ++s) pool.push_back(random_mel(100 + s));
      const WeightBundle bundle = calibrate_norms(raw, pool);
      for (std::uint64_t s = 0; s < 2; ++s) {
        const MelSpectrogram mel = random_mel(200 + s);
        const Embedding e = embed(mel, ModelParams::from_bundle(bundle, cfg));
        const auto ref = oracle::reference_embed(bundle, mel.energies());
        CAPTURE(cfg.label());
        CHECK(rel_err(e, ref) < 1e-4);
        CHECK(rel_err(embed(mel, ModelParams::from_bundle(raw, cfg)),
                      oracle::reference_embed(raw, mel.energies())) < 1e-4);
      }
    }
  }
}

TEST_CASE("embed is deterministic and the zero graph is constant") {
  const ModelConfig cfg = ModelConfig::make(Variant::edgespot, 1);
  const ModelParams mp = ModelParams::from_bundle(random_bundle(cfg, 3), cfg);
  const MelSpectrogram mel = random_mel(3);
  const Embedding a = embed(mel, mp);
  CHECK(a == embed(mel, mp));
  const std::vector<MelSpectrogram> batch = {mel, random_mel(4), mel};
  const auto b = embed_batch(batch, mp);
  REQUIRE(b.size() == 3);
  CHECK(b[0] == b[2]);
  CHECK((b[0] - a).cwiseAbs().maxCoeff() < 1e-5f);

  WeightBundle zero = random_bundle(cfg, 3);
  for (const Record& r : zero.records()) {
    if (r.name == kMetaRecord || r.name == kPcenRecord) continue;
    TensorF t(r.tensor.shape());
    // Keep norms well defined: unit variance, everything else zero.
    if (r.name.ends_with(".norm"))
      for (Index i = 3 * t.extent(1); i < t.size(); ++i) t[i] = 1.0f;
    zero.set(r.name, t);
  }
  const ModelParams zp = ModelParams::from_bundle(zero, cfg);
  const Embedding z0 = embed(mel, zp);
  CHECK(z0 == embed(random_mel(9), zp));
  CHECK(z0 == embed(mel, zp));
  CHECK(z0.allFinite());
}

TEST_CASE("calibrated norms whiten the stem on the calibration pool") {
  const ModelConfig cfg = ModelConfig::make(Variant::edgespot, 1);
  std::vector<MelSpectrogram> pool;
  for (std::uint64_t s = 0; s < 3; ++s) pool.push_back(random_mel(s));
  const WeightBundle raw = random_bundle(cfg, 5);
  const WeightBundle cal = calibrate_norms(raw, pool);
  // gamma and beta rows untouched, statistics replaced.
  const TensorF& a = raw.at("stem.norm");
  const TensorF& b = cal.at("stem.norm");
  for (Index i = 0; i < 2 * 16; ++i) CHECK(a[i] == b[i]);
  bool changed = false;
  for (Index i = 2 * 16; i < 4 * 16; ++i) changed |= a[i] != b[i];
  CHECK(changed);
  for (Index i = 3 * 16; i < 4 * 16; ++i) CHECK(b[i] >= 0.0f);
  CHECK(cal.at("stem.conv") == raw.at("stem.conv"));
}

TEST_CASE("pinned golden embedding") {
  // Recorded once after the network oracle agreed to 1.5e-7.
  const std::vector<float> golden = {
      -7.37577304e-02f, -4.48449478e-02f, -1.26240358e-01f, -1.64180800e-01f,
      -3.94825637e-02f, -1.44412950e-01f, -5.21149933e-02f, -1.27850667e-01f,
      -1.40547872e-01f, -3.90201099e-02f, -4.74873632e-02f, -3.51233445e-02f,
      -3.60028595e-02f, -5.14960997e-02f, -1.03560269e-01f, -5.78347556e-02f,
      -4.00833376e-02f, -3.50458063e-02f, -1.36742994e-01f, -4.16975170e-02f,
      -7.09832013e-02f, -3.50404270e-02f, -3.95221524e-02f, -3.47514488e-02f,
      -3.49499807e-02f, -5.10367304e-02f, -6.72027022e-02f, -2.28242293e-01f,
      -3.58609632e-02f, -4.72892970e-02f, -3.93097289e-02f, -6.16167635e-02f,
      -7.68852830e-02f, -9.45512056e-02f, -4.06865515e-02f, -3.87980826e-02f,
      -4.24186960e-02f, -9.07733589e-02f, -8.44587013e-02f, -3.37401219e-02f,
      -3.77877280e-02f, -4.00183722e-02f, -3.76913920e-02f, -3.49369124e-02f,
      -4.30462584e-02f, -8.37068483e-02f, -3.47073525e-02f, -7.32154623e-02f,
      -1.11142769e-01f, -1.68477833e-01f, -4.16518003e-02f, -3.75942998e-02f,
      -3.67270745e-02f, -3.85566577e-02f, -3.81553434e-02f, -1.22676179e-01f,
      -3.91846038e-02f, -4.60054278e-02f, -3.75948101e-02f, -1.27906412e-01f,
      -6.82044774e-02f, -4.47654948e-02f, -8.81987214e-02f, -3.96758653e-02f};
  const ModelConfig cfg = ModelConfig::make(Variant::edgespot, 1);
  std::vector<MelSpectrogram> pool;
  for (std::uint64_t s = 0; s < 4; ++s) pool.push_back(random_mel(100 + s));
  const WeightBundle b = calibrate_norms(random_bundle(cfg, 2026), pool);
  const Embedding e = embed(random_mel(7), ModelParams::from_bundle(b, cfg));
  REQUIRE(e.size() == 64);
  for (Index i = 0; i < 64; ++i)
    CHECK(e[i] == doctest::Approx(golden[i]).epsilon(1e-4).scale(1e-3));
}
