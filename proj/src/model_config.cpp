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

#include "edgespot/error.hpp"
#include "edgespot/model.hpp"

namespace edgespot {

std::string_view to_string(Variant v) {
  return v == Variant::edgespot ? "edgespot" : "bcresnet";
}

Variant parse_variant(std::string_view name) {
  if (name == "edgespot") return Variant::edgespot;
  if (name == "bcresnet" || name == "bcresnet-baseline")
    return Variant::bcresnet;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

ModelConfig ModelConfig::make(Variant variant, int width) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.width = width;
  const bool es = variant == Variant::edgespot;
  const LayerKind early = es ? LayerKind::fused_block : LayerKind::block;
  const char* early_op = es ? "Fused BC-ResBlock" : "BC-ResBlock";

  auto& L = cfg.layers;
  if (es) L.push_back({LayerKind::pcen, "pcen", "PCEN", 1, 0, {}, {}});
  L.push_back({LayerKind::stem_conv, "stem", "conv2d(5x5)-BN-ReLU", 1, 16,
               {2, 1}, {1, 1}});
  L.push_back({early, "stage1", early_op, 2, 8, {1, 1}, {1, 1}});
  L.push_back({early, "stage2", early_op, 2, 12, {2, 1}, {1, 2}});
  L.push_back(
      {LayerKind::block, "stage3", "BC-ResBlock", 4, 16, {2, 1}, {1, 4}});
  L.push_back(
      {LayerKind::block, "stage4", "BC-ResBlock", 4, 20, {1, 1}, {1, 8}});
  L.push_back({LayerKind::head_dw_conv, "head.dw", "DW conv2d(5x5)", 1, 20,
               {1, 1}, {1, 1}});
  L.push_back({LayerKind::head_pw_conv, "head.pw", "conv2d(1x1)-BN-ReLU", 1,
               32, {1, 1}, {1, 1}});
  if (es) {
    L.push_back({LayerKind::positional_encoding, "rpe",
                 "DW conv1d(16) Pos. E.", 1, 32, {1, 1}, {1, 1}});
    L.push_back(
        {LayerKind::attention, "attention", "SDPA-PReLU", 1, 0, {}, {}});
    L.push_back({LayerKind::aggregate, "aggregate", "conv1d(1)", 1, 1, {}, {}});
  } else {
    L.push_back({LayerKind::pool_project, "project", "avgpool-conv1x1", 1,
                 kEmbeddingDim, {}, {}});
  }
  cfg.validate();
  return cfg;
}

Index ModelConfig::channels(const LayerSpec& layer) const {
  switch (layer.kind) {
    case LayerKind::aggregate:
      return 1;
    case LayerKind::pool_project:
      return kEmbeddingDim;
    case LayerKind::pcen:
      return 1;
    case LayerKind::attention:
      return kEmbeddingDim;
    default:
      return layer.channels * width;
  }
}

const LayerSpec& ModelConfig::layer(LayerKind kind) const {
  const auto it = std::find_if(layers.begin(), layers.end(),
                               [&](const LayerSpec& l) { return l.kind == kind; });
  if (it == layers.end()) throw ConfigError("model config: layer missing");
  return *it;
}

bool ModelConfig::has(LayerKind kind) const {
  return std::any_of(layers.begin(), layers.end(),
                     [&](const LayerSpec& l) { return l.kind == kind; });
}

void ModelConfig::validate() const {
  if (width < 1)
    throw ConfigError("model config: width multiplier must be >= 1, got " +
                      std::to_string(width));
  if (layers.empty()) throw ConfigError("model config: empty stage table");
  for (const LayerSpec& l : layers) {
    if (l.repeat < 1) throw ConfigError("model config: repeat must be >= 1");
    if (l.stride.freq < 1 || l.stride.time < 1 || l.dilation.freq < 1 ||
        l.dilation.time < 1)
      throw ConfigError("model config: stride/dilation must be >= 1 in " +
                        l.name);
  }
}

std::string ModelConfig::label() const {
  return std::string(to_string(variant)) + "-" + std::to_string(width);
}

}  // namespace edgespot
