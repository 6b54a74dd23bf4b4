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
#include "edgespot/footprint.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

namespace edgespot {

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::pcen: return "pcen";
    case CostKind::conv: return "conv";
    case CostKind::norm: return "norm";
    case CostKind::pool: return "pool";
    case CostKind::attention: return "attention";
  }
  return "?";
}

Index Footprint::total_params() const {
  return std::accumulate(rows.begin(), rows.end(), Index{0},
                         [](Index a, const FootprintRow& r) { return a + r.params; });
}

Index Footprint::total_macs() const {
  Index n = 0;
  for (const auto& r : rows)
    if (in_mac_total(r.kind)) n += r.macs;
  return n;
}

Index Footprint::macs_of(CostKind kind) const {
  Index n = 0;
  for (const auto& r : rows)
    if (r.kind == kind) n += r.macs;
  return n;
}

Index Footprint::group_params(std::string_view group) const {
  Index n = 0;
  for (const auto& r : rows)
    if (r.group == group) n += r.params;
  return n;
}

Index Footprint::group_macs(std::string_view group) const {
  Index n = 0;
  for (const auto& r : rows)
    if (r.group == group) n += r.macs;
  return n;
}

Footprint footprint(const ModelConfig& cfg) {
  cfg.validate();
  Footprint fp;
  Index freq = kMelBands;
  const Index time = kFrames;
  Index cin = 1;

  for (const LayerSpec& layer : cfg.layers) {
    const Index c = cfg.channels(layer);
    auto row = [&](std::string name, CostKind kind, Index params, Index macs) {
      fp.rows.push_back({std::move(name), layer.name, kind, params, macs});
    };
    switch (layer.kind) {
      case LayerKind::pcen:
        row("pcen", CostKind::pcen, 4, 2 * freq * time);
        break;
      case LayerKind::stem_conv: {
        freq = ConvSpec::output_extent(freq, 5, layer.stride.freq, 1,
                                       AxisPadding::same(5));
        row("stem.conv", CostKind::conv, 25 * c, 25 * c * freq * time);
        row("stem.norm", CostKind::norm, 2 * c, 2 * c * freq * time);
        cin = c;
        break;
      }
      case LayerKind::fused_block:
      case LayerKind::block: {
        const bool fused = layer.kind == LayerKind::fused_block;
        for (Index b = 0; b < layer.repeat; ++b) {
          const std::string p = layer.name + ".block" + std::to_string(b + 1);
          if (cin != c) {
            row(p + ".transition.conv", CostKind::conv, cin * c,
                cin * c * freq * time);
            row(p + ".transition.norm", CostKind::norm, 2 * c,
                2 * c * freq * time);
          }
          const Index stride = b == 0 ? layer.stride.freq : 1;
          freq = ConvSpec::output_extent(freq, kBlockKernel, stride, 1,
                                         AxisPadding::same(kBlockKernel));
          const Index plane = c * freq * time;
          row(p + ".freq.conv", CostKind::conv, kBlockKernel * c,
              kBlockKernel * plane);
          row(p + ".freq.norm", CostKind::norm, 2 * c * kSubBands, 2 * plane);
          row(p + ".freq.avg", CostKind::pool, 0, plane);
          if (fused) {
            row(p + ".temporal.conv", CostKind::conv, kBlockKernel * c * c,
                kBlockKernel * c * c * time);
          } else {
            row(p + ".temporal.conv", CostKind::conv, kBlockKernel * c,
                kBlockKernel * c * time);
          }
          row(p + ".temporal.norm", CostKind::norm, 2 * c, 2 * c * time);
          if (!fused)
            row(p + ".pointwise.conv", CostKind::conv, c * c, c * c * time);
          cin = c;
        }
        break;
      }
      case LayerKind::head_dw_conv:
        freq = ConvSpec::output_extent(freq, 5, 1, 1, AxisPadding::valid());
        row("head.dw.conv", CostKind::conv, 25 * cin + cin,
            25 * cin * freq * time);
        break;
      case LayerKind::head_pw_conv:
        row("head.pw.conv", CostKind::conv, cin * c, cin * c * freq * time);
        row("head.pw.norm", CostKind::norm, 2 * c, 2 * c * freq * time);
        cin = c;
        break;
      case LayerKind::positional_encoding:
        row("rpe.conv", CostKind::conv, kRpeKernel * cin + cin,
            kRpeKernel * cin * time);
        break;
      case LayerKind::attention:
        row("attention.qkv", CostKind::attention,
            3 * (cin * kEmbeddingDim + kEmbeddingDim),
            3 * time * cin * kEmbeddingDim);
        row("attention.scores", CostKind::attention, 0,
            time * time * kEmbeddingDim);
        row("attention.context", CostKind::attention, 0,
            time * time * kEmbeddingDim);
        row("attention.prelu", CostKind::attention, 1, 0);
        break;
      case LayerKind::aggregate:
        row("aggregate.conv", CostKind::conv, time + 1, time * kEmbeddingDim);
        break;
      case LayerKind::pool_project:
        row("project.pool", CostKind::pool, 0, cin * time);
        row("project.conv", CostKind::conv, kEmbeddingDim * cin + kEmbeddingDim,
            kEmbeddingDim * cin);
        break;
    }
  }
  return fp;
}

CountTable count_params(const ModelConfig& config) {
  CountTable t;
  for (const auto& r : footprint(config).rows) {
    t.rows.emplace_back(r.name, r.params);
    t.total += r.params;
  }
  return t;
}

CountTable count_macs(const ModelConfig& config) {
  CountTable t;
  for (const auto& r : footprint(config).rows) {
    if (!in_mac_total(r.kind)) continue;
    t.rows.emplace_back(r.name, r.macs);
    t.total += r.macs;
  }
  return t;
}

std::optional<ReferenceFootprint> reference_footprint(Variant variant,
                                                      int width) {
  static constexpr ReferenceFootprint kEdgeSpot[] = {
      {16.6e3, 4.5e6}, {43.3e3, 10.3e6}, {80.6e3, 18.6e6}, {128.3e3, 29.4e6}};
  static constexpr ReferenceFootprint kBcResNet[] = {
      {10.9e3, 2.5e6}, {30.6e3, 7.3e6}, {59.2e3, 14.5e6}, {96.6e3, 24.1e6}};
  if (width < 1 || width > 4) return std::nullopt;
  return variant == Variant::edgespot ? kEdgeSpot[width - 1]
                                      : kBcResNet[width - 1];
}

std::string format_footprint(const Footprint& fp, bool machine) {
  std::ostringstream os;
  if (machine) {
    os << "name,group,kind,params,macs,in_total\n";
    for (const auto& r : fp.rows)
      os << r.name << ',' << r.group << ',' << to_string(r.kind) << ','
         << r.params << ',' << r.macs << ',' << in_mac_total(r.kind) << '\n';
    os << "total,,," << fp.total_params() << ',' << fp.total_macs() << ",1\n";
    return os.str();
  }
  os << std::left << std::setw(34) << "layer" << std::setw(10) << "kind"
     << std::right << std::setw(10) << "params" << std::setw(12) << "macs"
     << '\n';
  for (const auto& r : fp.rows)
    os << std::left << std::setw(34) << r.name << std::setw(10)
       << to_string(r.kind) << std::right << std::setw(10) << r.params
       << std::setw(12) << r.macs << (in_mac_total(r.kind) ? "" : "  (excluded)")
       << '\n';
  os << std::left << std::setw(44) << "total" << std::right << std::setw(10)
     << fp.total_params() << std::setw(12) << fp.total_macs() << '\n';
  for (CostKind k : {CostKind::conv, CostKind::attention, CostKind::norm,
                     CostKind::pool, CostKind::pcen})
    os << "  macs[" << to_string(k) << "] = " << fp.macs_of(k) << '\n';
  return os.str();
}

}  // namespace edgespot
