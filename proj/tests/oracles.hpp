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
#ifndef EDGESPOT_TESTS_ORACLES_HPP_
#define EDGESPOT_TESTS_ORACLES_HPP_

// Straightforward reference implementations used as test oracles. They work
// in double precision on plain vectors and share no code with the library
// kernels.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "edgespot/tensor.hpp"
#include "edgespot/weights.hpp"

namespace oracle {

using edgespot::Index;

struct Volume {
  Index c = 0, f = 0, t = 0;
  std::vector<double> v;

  Volume() = default;
  Volume(Index c_, Index f_, Index t_) : c(c_), f(f_), t(t_), v(c_ * f_ * t_) {}
  double& at(Index i, Index j, Index k) { return v[(i * f + j) * t + k]; }
  double at(Index i, Index j, Index k) const { return v[(i * f + j) * t + k]; }
};

inline Volume from_tensor(const edgespot::TensorF& x) {
  Volume out(x.extent(0), x.rank() == 3 ? x.extent(1) : 1,
             x.extent(x.rank() - 1));
  for (Index i = 0; i < x.size(); ++i) out.v[i] = x[i];
  return out;
}

inline edgespot::TensorF to_tensor(const Volume& x) {
  std::vector<float> d(x.v.begin(), x.v.end());
  return edgespot::TensorF({x.c, x.f, x.t}, std::move(d));
}

struct Conv {
  Index out = 1, groups = 1, kf = 1, kt = 1;
  Index sf = 1, st = 1, df = 1, dt = 1;
  Index pf0 = 0, pf1 = 0, pt0 = 0, pt1 = 0;
};

// Direct 7-deep loop. `w` is (out, in/groups, kf, kt) flattened.
inline Volume conv2d(const Volume& x, const Conv& s, const std::vector<double>& w,
                     const std::vector<double>& bias = {}) {
  const Index of = (x.f + s.pf0 + s.pf1 - s.df * (s.kf - 1) - 1) / s.sf + 1;
  const Index ot = (x.t + s.pt0 + s.pt1 - s.dt * (s.kt - 1) - 1) / s.st + 1;
  const Index ipg = x.c / s.groups;
  const Index opg = s.out / s.groups;
  Volume y(s.out, of, ot);
  for (Index o = 0; o < s.out; ++o)
    for (Index i = 0; i < of; ++i)
      for (Index j = 0; j < ot; ++j) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (Index ic = 0; ic < ipg; ++ic)
          for (Index a = 0; a < s.kf; ++a)
            for (Index b = 0; b < s.kt; ++b) {
              const Index fi = i * s.sf + a * s.df - s.pf0;
              const Index ti = j * s.st + b * s.dt - s.pt0;
              if (fi < 0 || fi >= x.f || ti < 0 || ti >= x.t) continue;
              const Index cin = (o / opg) * ipg + ic;
              acc += w[((o * ipg + ic) * s.kf + a) * s.kt + b] * x.at(cin, fi, ti);
            }
        y.at(o, i, j) = acc;
      }
  return y;
}

// Norm record rows: gamma, beta, mean, var. Entry index = c * bands + band.
inline void normalize(Volume& x, const std::vector<double>& rec, Index bands,
                      double eps = 1e-5) {
  const Index n = static_cast<Index>(rec.size()) / 4;
  const Index rows = x.f / bands;
  for (Index c = 0; c < x.c; ++c)
    for (Index f = 0; f < x.f; ++f) {
      const Index k = c * bands + f / rows;
      const double g = rec[k], b = rec[n + k], m = rec[2 * n + k],
                   v = rec[3 * n + k];
      for (Index t = 0; t < x.t; ++t)
        x.at(c, f, t) = g * (x.at(c, f, t) - m) / std::sqrt(v + eps) + b;
    }
}

inline double relu(double v) { return v > 0 ? v : 0; }
inline double swish(double v) { return v / (1.0 + std::exp(-v)); }

// Scalar PCEN recurrence for one band.
inline std::vector<double> pcen_row(const std::vector<double>& e, double alpha,
                                    double r, double delta, double s,
                                    double eps = 1e-6) {
  std::vector<double> out(e.size());
  double m = e.empty() ? 0.0 : e[0];
  for (std::size_t t = 0; t < e.size(); ++t) {
    if (t > 0) m = (1 - s) * m + s * e[t];
    out[t] = std::pow(e[t] / std::pow(eps + m, alpha) + delta, r) -
             std::pow(delta, r);
  }
  return out;
}

// |X(k)|^2 of a real frame by direct summation.
inline double dft_power(const std::vector<double>& x, Index k) {
  std::complex<double> acc = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += x[i] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k) *
                                      static_cast<double>(i) / n);
  return std::norm(acc);
}

inline std::vector<double> doubles(const edgespot::TensorF& t) {
  return {t.data(), t.data() + t.size()};
}

// Uniform random float tensor.
inline edgespot::TensorF random_tensor(const edgespot::Shape& shape,
                                       std::mt19937_64& rng, double lo = -1.0,
                                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  edgespot::TensorF t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(u(rng));
  return t;
}

// Whole-network reference forward pass in double precision, driven only by
// record names and the block schedule below.
struct StageRow {
  const char* name;
  Index repeat, channels, stride, dilation;
  bool fused;
};

inline std::vector<double> reference_embed(const edgespot::WeightBundle& b,
                                           const edgespot::TensorF& mel) {
  const bool es = b.config().variant == edgespot::Variant::edgespot;
  const Index tau = b.config().width;
  auto rec = [&](const std::string& n) { return doubles(b.at(n)); };

  Volume x(1, 40, 101);
  for (Index f = 0; f < 40; ++f) {
    std::vector<double> row(101);
    for (Index t = 0; t < 101; ++t) row[t] = mel[f * 101 + t];
    if (es) {
      const auto p = rec("pcen");
      row = pcen_row(row, p[0], p[1], p[2], p[3]);
    } else {
      for (double& v : row) v = std::log(v + 1e-6);
    }
    for (Index t = 0; t < 101; ++t) x.at(0, f, t) = row[t];
  }

  Conv stem{16 * tau, 1, 5, 5, 2, 1, 1, 1, 2, 2, 2, 2};
  x = conv2d(x, stem, rec("stem.conv"));
  normalize(x, rec("stem.norm"), 1);
  for (double& v : x.v) v = relu(v);

  const StageRow stages[] = {{"stage1", 2, 8, 1, 1, es},
                             {"stage2", 2, 12, 2, 2, es},
                             {"stage3", 4, 16, 2, 4, false},
                             {"stage4", 4, 20, 1, 8, false}};
  for (const StageRow& st : stages) {
    const Index c = st.channels * tau;
    for (Index blk = 0; blk < st.repeat; ++blk) {
      const std::string p =
          std::string(st.name) + ".block" + std::to_string(blk + 1);
      const Index stride = blk == 0 ? st.stride : 1;
      const bool transition = x.c != c || stride != 1;
      Volume y = x;
      if (x.c != c) {
        Conv pw{c};
        y = conv2d(x, pw, rec(p + ".transition.conv"));
        normalize(y, rec(p + ".transition.norm"), 1);
        for (double& v : y.v) v = relu(v);
      }
      Conv fc{c, c, 3, 1, stride, 1, 1, 1, 1, 1, 0, 0};
      Volume f2 = conv2d(y, fc, rec(p + ".freq.conv"));
      normalize(f2, rec(p + ".freq.norm"), 5);
      Volume avg(c, 1, f2.t);
      for (Index ch = 0; ch < c; ++ch)
        for (Index t = 0; t < f2.t; ++t) {
          double s = 0;
          for (Index f = 0; f < f2.f; ++f) s += f2.at(ch, f, t);
          avg.at(ch, 0, t) = s / static_cast<double>(f2.f);
        }
      Conv tc{c, st.fused ? 1 : c, 1, 3, 1, 1, 1, st.dilation,
              0, 0, st.dilation, st.dilation};
      Volume tp = conv2d(avg, tc, rec(p + ".temporal.conv"));
      normalize(tp, rec(p + ".temporal.norm"), 1);
      for (double& v : tp.v) v = swish(v);
      if (!st.fused) tp = conv2d(tp, Conv{c}, rec(p + ".pointwise.conv"));
      Volume out(c, f2.f, f2.t);
      for (Index ch = 0; ch < c; ++ch)
        for (Index f = 0; f < f2.f; ++f)
          for (Index t = 0; t < f2.t; ++t) {
            double v = f2.at(ch, f, t) + tp.at(ch, 0, t);
            if (!transition) v += x.at(ch, f, t);
            out.at(ch, f, t) = relu(v);
          }
      x = std::move(out);
    }
  }

  const Index c = x.c;
  Conv dw{c, c, 5, 5, 1, 1, 1, 1, 0, 0, 2, 2};
  x = conv2d(x, dw, rec("head.dw.conv"), rec("head.dw.bias"));
  const Index c1 = 32 * tau;
  x = conv2d(x, Conv{c1}, rec("head.pw.conv"));
  normalize(x, rec("head.pw.norm"), 1);
  for (double& v : x.v) v = relu(v);
  const Index steps = x.t;

  std::vector<double> e(64, 0.0);
  if (!es) {
    const auto w = rec("project.weight");
    const auto bias = rec("project.bias");
    for (Index d = 0; d < 64; ++d) {
      double acc = bias[d];
      for (Index ch = 0; ch < c1; ++ch) {
        double m = 0;
        for (Index t = 0; t < steps; ++t) m += x.at(ch, 0, t);
        acc += w[d * c1 + ch] * m / static_cast<double>(steps);
      }
      e[d] = acc;
    }
    return e;
  }

  // Relative positional encoding, taps at offsets -8..7.
  const auto filt = rec("rpe.filters");
  const auto rb = rec("rpe.bias");
  std::vector<std::vector<double>> seq(steps, std::vector<double>(c1));
  for (Index ch = 0; ch < c1; ++ch)
    for (Index t = 0; t < steps; ++t) {
      double phi = rb[ch];
      for (Index k = 0; k < 16; ++k) {
        const Index src = t + k - 8;
        if (src >= 0 && src < steps) phi += filt[ch * 16 + k] * x.at(ch, 0, src);
      }
      seq[t][ch] = x.at(ch, 0, t) + phi;
    }

  auto project = [&](const char* w, const char* bias) {
    const auto wm = rec(w);
    const auto bv = rec(bias);
    std::vector<std::vector<double>> out(steps, std::vector<double>(64));
    for (Index t = 0; t < steps; ++t)
      for (Index d = 0; d < 64; ++d) {
        double acc = bv[d];
        for (Index ch = 0; ch < c1; ++ch) acc += seq[t][ch] * wm[ch * 64 + d];
        out[t][d] = acc;
      }
    return out;
  };
  const auto q = project("attention.w_q", "attention.b_q");
  const auto k = project("attention.w_k", "attention.b_k");
  const auto v = project("attention.w_v", "attention.b_v");
  const double slope = rec("attention.prelu")[0];
  const auto agg = rec("aggregate.weight");
  const double agg_b = rec("aggregate.bias")[0];
  for (double& val : e) val = agg_b;
  for (Index t = 0; t < steps; ++t) {
    std::vector<double> logits(steps);
    double mx = -1e300;
    for (Index u = 0; u < steps; ++u) {
      double s = 0;
      for (Index d = 0; d < 64; ++d) s += q[t][d] * k[u][d];
      logits[u] = s / 8.0;
      mx = std::max(mx, logits[u]);
    }
    double z = 0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (Index d = 0; d < 64; ++d) {
      double acc = 0;
      for (Index u = 0; u < steps; ++u) acc += logits[u] / z * v[u][d];
      if (acc < 0) acc *= slope;
      e[d] += agg[t] * acc;
    }
  }
  return e;
}

}  // namespace oracle

#endif  // EDGESPOT_TESTS_ORACLES_HPP_
