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
#include "edgespot/proto.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <locale>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "edgespot/error.hpp"

namespace edgespot {
namespace {

constexpr std::string_view kStoreHeader = "edgespot-prototypes";
constexpr int kStoreVersion = 1;

void check_dim(const Embedding& e, const char* what) {
  if (e.size() != kEmbeddingDim)
    throw DimensionError(std::string(what) + ": embedding length " +
                         std::to_string(e.size()) + ", expected " +
                         std::to_string(kEmbeddingDim));
}

// Reads "<key> <value>" and returns the value.
std::string expect_key(std::istream& in, std::string_view key) {
  std::string k, v;
  if (!(in >> k >> v) || k != key)
    throw FormatError("prototype store: expected '" + std::string(key) + "'");
  return v;
}

}  // namespace

PrototypeStore::PrototypeStore(double threshold) { set_threshold(threshold); }

void PrototypeStore::add(Prototype p) {
  if (p.label.empty() ||
      std::any_of(p.label.begin(), p.label.end(),
                  [](unsigned char ch) { return std::isspace(ch); }))
    throw ConfigError("prototype store: labels must be non-empty without "
                      "whitespace: '" + p.label + "'");
  check_dim(p.mean, "prototype store");
  if (p.shots < 1) throw ConfigError("prototype store: shot count must be >= 1");
  const std::string label = p.label;
  if (!prototypes_.emplace(label, std::move(p)).second)
    throw ConfigError("prototype store: duplicate label '" + label + "'");
}

const Prototype* PrototypeStore::find(std::string_view label) const {
  const auto it = prototypes_.find(label);
  return it == prototypes_.end() ? nullptr : &it->second;
}

void PrototypeStore::set_threshold(double threshold) {
  if (!std::isfinite(threshold))
    throw ParameterError("prototype store: threshold must be finite");
  threshold_ = threshold;
}

Prototype enroll(std::string label, std::span<const Embedding> shots) {
  if (shots.empty())
    throw ConfigError("enroll: no embeddings for '" + label + "'");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kEmbeddingDim);
  for (const Embedding& e : shots) {
    check_dim(e, "enroll");
    sum += e.cast<double>();
  }
  const auto k = static_cast<Index>(shots.size());
  return {std::move(label), (sum / static_cast<double>(k)).cast<float>(), k};
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  const Eigen::VectorXd x = a.cast<double>();
  const Eigen::VectorXd y = b.cast<double>();
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0)
    throw NumericError("cosine: zero-norm vector");
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

double score(const Embedding& e, const Prototype& p) {
  check_dim(e, "score");
  check_dim(p.mean, "score");
  return cosine(e, p.mean);
}

Detection detect(const Embedding& e, const PrototypeStore& store) {
  return detect(e, store, store.threshold());
}

Detection detect(const Embedding& e, const PrototypeStore& store,
                 double threshold) {
  if (store.empty()) throw ConfigError("detect: prototype store is empty");
  Detection d;
  d.score = -std::numeric_limits<double>::infinity();
  for (const auto& [label, proto] : store.prototypes()) {
    const double s = score(e, proto);
    d.scores.emplace_back(label, s);
    // Map iteration is label-ordered, so strict > keeps the smallest label.
    if (s > d.score) {
      d.score = s;
      d.label = label;
    }
  }
  d.accepted = d.score >= threshold;
  return d;
}

double calibrate_threshold(std::span<const double> negatives,
                           double target_far) {
  if (negatives.empty())
    throw ConfigError("calibrate_threshold: no negative scores");
  if (!(target_far > 0.0 && target_far < 1.0))
    throw ParameterError("calibrate_threshold: target FAR must lie in (0, 1)");
  std::vector<double> sorted(negatives.begin(), negatives.end());
  for (double v : sorted)
    if (std::isnan(v)) throw NumericError("calibrate_threshold: NaN score");
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Number of negatives allowed at or above the threshold.
  const auto budget = static_cast<std::size_t>(std::floor(target_far * n + 1e-9));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    if (sorted.size() - i <= budget) return sorted[i];
  }
  return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
}

void write_store(std::ostream& out, const PrototypeStore& store) {
  out << kStoreHeader << ' ' << kStoreVersion << '\n';
  out << "metric " << PrototypeStore::kMetric << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "threshold " << store.threshold() << '\n';
  out << "dim " << kEmbeddingDim << '\n';
  out << "count " << store.size() << '\n';
  out.precision(std::numeric_limits<float>::max_digits10);
  for (const auto& [label, p] : store.prototypes()) {
    out << label << ' ' << p.shots;
    for (Index i = 0; i < p.mean.size(); ++i) out << ' ' << p.mean[i];
    out << '\n';
  }
}

PrototypeStore read_store(std::istream& in) {
  in.imbue(std::locale::classic());
  std::string header;
  int version = 0;
  if (!(in >> header >> version) || header != kStoreHeader)
    throw FormatError("prototype store: bad header");
  if (version != kStoreVersion)
    throw FormatError("prototype store: unsupported version " +
                      std::to_string(version));
  if (expect_key(in, "metric") != PrototypeStore::kMetric)
    throw FormatError("prototype store: unsupported metric");
  double threshold = 0.0;
  Index dim = 0, count = 0;
  try {
    threshold = std::stod(expect_key(in, "threshold"));
    dim = std::stoll(expect_key(in, "dim"));
    count = std::stoll(expect_key(in, "count"));
  } catch (const std::logic_error&) {
    throw FormatError("prototype store: malformed header value");
  }
  if (dim != kEmbeddingDim)
    throw FormatError("prototype store: embedding dim " + std::to_string(dim) +
                      ", expected " + std::to_string(kEmbeddingDim));
  if (count < 0) throw FormatError("prototype store: negative count");

  PrototypeStore store(threshold);
  for (Index i = 0; i < count; ++i) {
    Prototype p;
    p.mean.resize(dim);
    if (!(in >> p.label >> p.shots))
      throw FormatError("prototype store: truncated record " +
                        std::to_string(i));
    for (Index k = 0; k < dim; ++k)
      if (!(in >> p.mean[k]))
        throw FormatError("prototype store: truncated vector for '" + p.label +
                          "'");
    store.add(std::move(p));
  }
  return store;
}

void save_store(const std::filesystem::path& path, const PrototypeStore& store) {
  std::ofstream out(path);
  out.imbue(std::locale::classic());
  write_store(out, store);
  if (!out) throw FormatError("cannot write " + path.string());
}

PrototypeStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prototype store " + path.string());
  return read_store(in);
}

}  // namespace edgespot
