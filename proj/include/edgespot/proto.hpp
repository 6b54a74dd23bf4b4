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
#ifndef EDGESPOT_PROTO_HPP_
#define EDGESPOT_PROTO_HPP_

// Few-shot enrollment and open-set detection against keyword prototypes.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgespot/model.hpp"

namespace edgespot {

// Mean of K enrollment embeddings. Stored unnormalized so that enrolling a
// concatenation equals the K-weighted mean of the parts.
struct Prototype {
  std::string label;
  Embedding mean;
  Index shots = 0;
};

// Label-ordered prototypes plus a decision threshold on cosine similarity.
// Reads may run concurrently; add/set_threshold need exclusive access.
class PrototypeStore {
 public:
  static constexpr std::string_view kMetric = "cosine";

  explicit PrototypeStore(double threshold = 0.5);

  // Throws ConfigError on a duplicate label.
  void add(Prototype p);
  const Prototype* find(std::string_view label) const;

  const std::map<std::string, Prototype, std::less<>>& prototypes() const {
    return prototypes_;
  }
  bool empty() const { return prototypes_.empty(); }
  Index size() const { return static_cast<Index>(prototypes_.size()); }

  double threshold() const { return threshold_; }
  void set_threshold(double threshold);

 private:
  std::map<std::string, Prototype, std::less<>> prototypes_;
  double threshold_;
};

Prototype enroll(std::string label, std::span<const Embedding> shots);

double cosine(const Embedding& a, const Embedding& b);
// Cosine similarity in [-1, 1]; throws on zero-norm or length mismatch.
double score(const Embedding& e, const Prototype& p);

struct Detection {
  std::string label;
  double score = 0.0;
  bool accepted = false;
  std::vector<std::pair<std::string, double>> scores;  // label order
};

// Best-scoring prototype; ties resolve to the lexicographically smallest
// label. Accepted iff score >= threshold.
Detection detect(const Embedding& e, const PrototypeStore& store);
Detection detect(const Embedding& e, const PrototypeStore& store,
                 double threshold);

// Smallest observed negative score v such that the fraction of negatives
// >= v is at most target_far; if even the maximum admits too many, the next
// representable double above the maximum.
double calibrate_threshold(std::span<const double> negatives,
                           double target_far);

// Versioned text format:
//   edgespot-prototypes 1
//   metric cosine
//   threshold <theta>
//   dim 64
//   count <n>
//   <label> <K> <64 values>      (one line per prototype)
void write_store(std::ostream& out, const PrototypeStore& store);
PrototypeStore read_store(std::istream& in);
void save_store(const std::filesystem::path& path, const PrototypeStore& store);
PrototypeStore load_store(const std::filesystem::path& path);

}  // namespace edgespot

#endif  // EDGESPOT_PROTO_HPP_
