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
#ifndef EDGESPOT_FOOTPRINT_HPP_
#define EDGESPOT_FOOTPRINT_HPP_

// Closed-form parameter and multiply-accumulate accounting for a 40 x 101
// input.
//
// Counting convention:
//   conv       out-elements x (in-channels / groups) x kernel-size
//   attention  QKV projections (T*C*64 each), QK^T and AV (T*T*64 each)
//   pcen       IIR smoother, 2 MACs per element
//   norm       folded affine, 2 ops per element; params = gamma + beta
//   pool       1 op per input element (frequency average, global pool)
//   zero       biases, activations, softmax, residual additions
// Norm and pool ops are listed per layer but left out of the MAC total.
// Running statistics and the bundle metadata are not parameters.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edgespot/model.hpp"

namespace edgespot {

enum class CostKind { pcen, conv, norm, pool, attention };

// True for the kinds that contribute to the MAC total.
constexpr bool in_mac_total(CostKind kind) {
  return kind != CostKind::norm && kind != CostKind::pool;
}

std::string_view to_string(CostKind kind);

struct FootprintRow {
  std::string name;
  std::string group;  // architecture-table row, e.g. "stage3"
  CostKind kind;
  Index params = 0;
  Index macs = 0;
};

struct Footprint {
  std::vector<FootprintRow> rows;

  Index total_params() const;
  Index total_macs() const;
  Index macs_of(CostKind kind) const;
  Index group_params(std::string_view group) const;
  Index group_macs(std::string_view group) const;
};

Footprint footprint(const ModelConfig& config);

struct CountTable {
  std::vector<std::pair<std::string, Index>> rows;
  Index total = 0;
};

CountTable count_params(const ModelConfig& config);
CountTable count_macs(const ModelConfig& config);

// Published #Params / #MACs for the eight reference configurations.
struct ReferenceFootprint {
  double params;
  double macs;
};
std::optional<ReferenceFootprint> reference_footprint(Variant variant,
                                                      int width);

// Text table, or "name,group,kind,params,macs,in_total" CSV when `machine`
// is set. Both end with total lines.
std::string format_footprint(const Footprint& fp, bool machine);

}  // namespace edgespot

#endif  // EDGESPOT_FOOTPRINT_HPP_
