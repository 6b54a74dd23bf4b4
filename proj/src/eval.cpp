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
#include "edgespot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <locale>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "edgespot/error.hpp"

namespace edgespot {
namespace {

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw ConfigError(std::string(what) + ": empty score list");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Fisher-Yates with an explicit index draw so the permutation does not
// depend on the standard library's distribution implementation.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

DetPoint det_at_far(std::span<const double> positives,
                    std::span<const double> negatives, double far) {
  require_nonempty(positives, "det_at_far");
  require_nonempty(negatives, "det_at_far");
  DetPoint p;
  p.far = far;
  p.threshold = calibrate_threshold(negatives, far);
  const auto hits = std::count_if(positives.begin(), positives.end(),
                                  [&](double s) { return s >= p.threshold; });
  p.rate = static_cast<double>(hits) / static_cast<double>(positives.size());
  return p;
}

PrototypeStore enroll_trial(const TrialSet& trial, double threshold) {
  PrototypeStore store(threshold);
  for (const auto& [label, shots] : trial.enrollment) {
    std::vector<Embedding> embeddings;
    embeddings.reserve(shots.size());
    for (const auto& s : shots) embeddings.push_back(s.embedding);
    store.add(enroll(label, embeddings));
  }
  return store;
}

TrialScores trial_scores(const TrialSet& trial, const PrototypeStore& store) {
  TrialScores out;
  for (const auto& t : trial.positives) {
    const Prototype* p = store.find(t.label);
    if (!p)
      throw ConfigError("trial label '" + t.label + "' missing from store");
    out.positive.push_back(score(t.embedding, *p));
  }
  for (const auto& t : trial.negatives)
    out.negative.push_back(detect(t.embedding, store).score);
  return out;
}

DetPoint acc_at_far(const TrialSet& trial, const PrototypeStore& store,
                    double far) {
  if (trial.positives.empty() || trial.negatives.empty())
    throw ConfigError("acc_at_far: trial needs positives and negatives");
  std::vector<double> negative;
  negative.reserve(trial.negatives.size());
  for (const auto& t : trial.negatives)
    negative.push_back(detect(t.embedding, store).score);

  DetPoint p;
  p.far = far;
  p.threshold = calibrate_threshold(negative, far);
  std::size_t correct = 0;
  for (const auto& t : trial.positives) {
    if (!store.find(t.label))
      throw ConfigError("trial label '" + t.label + "' missing from store");
    const Detection d = detect(t.embedding, store, p.threshold);
    if (d.accepted && d.label == t.label) ++correct;
  }
  p.rate = static_cast<double>(correct) /
           static_cast<double>(trial.positives.size());
  return p;
}

double auroc(std::span<const double> positives,
             std::span<const double> negatives) {
  require_nonempty(positives, "auroc");
  require_nonempty(negatives, "auroc");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.push_back({s, true});
  for (double s : negatives) all.push_back({s, false});
  for (const Item& it : all)
    if (std::isnan(it.score)) throw NumericError("auroc: NaN score");
  std::sort(all.begin(), all.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  // Twice the positive rank sum, using mid-ranks over tie groups so every
  // quantity stays an integer.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      pos_in_group += all[j].positive;
      ++j;
    }
    twice_rank_sum += pos_in_group * (i + 1 + j);
    i = j;
  }
  const std::uint64_t np = positives.size();
  const std::uint64_t nn = negatives.size();
  const std::uint64_t twice_u = twice_rank_sum - np * (np + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * np * nn);
}

std::vector<TrialSet> make_episodes(std::span<const LabeledEmbedding> dataset,
                                    Index n_targets, Index n_unknown,
                                    Index shots, Index n_trials,
                                    std::uint64_t seed) {
  if (n_targets < 1 || n_unknown < 1 || shots < 1 || n_trials < 1)
    throw ConfigError("make_episodes: counts must be >= 1");
  std::map<std::string, std::vector<const LabeledEmbedding*>> by_label;
  std::set<std::string> ids;
  for (const auto& item : dataset) {
    if (!ids.insert(item.id).second)
      throw ConfigError("make_episodes: duplicate utterance id '" + item.id +
                        "'");
    by_label[item.label].push_back(&item);
  }
  if (static_cast<Index>(by_label.size()) < n_targets + n_unknown)
    throw ConfigError("make_episodes: need " +
                      std::to_string(n_targets + n_unknown) +
                      " labels, dataset has " +
                      std::to_string(by_label.size()));
  for (auto& [label, items] : by_label) {
    if (static_cast<Index>(items.size()) <= shots)
      throw ConfigError("make_episodes: label '" + label + "' has " +
                        std::to_string(items.size()) +
                        " samples, need more than " + std::to_string(shots));
    std::sort(items.begin(), items.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
  }
  std::vector<std::string> labels;
  for (const auto& [label, items] : by_label) labels.push_back(label);

  std::vector<TrialSet> out;
  out.reserve(static_cast<std::size_t>(n_trials));
  for (Index trial = 0; trial < n_trials; ++trial) {
    TrialSet ts;
    ts.shots = shots;
    ts.seed = splitmix64(seed + static_cast<std::uint64_t>(trial));
    std::mt19937_64 rng(ts.seed);
    std::vector<std::string> order = labels;
    shuffle(order, rng);
    for (Index i = 0; i < n_targets; ++i) {
      std::vector<const LabeledEmbedding*> items = by_label.at(order[i]);
      shuffle(items, rng);
      auto& enrolled = ts.enrollment[order[i]];
      for (std::size_t k = 0; k < items.size(); ++k) {
        if (static_cast<Index>(k) < shots)
          enrolled.push_back(*items[k]);
        else
          ts.positives.push_back(*items[k]);
      }
    }
    for (Index i = n_targets; i < n_targets + n_unknown; ++i)
      for (const auto* item : by_label.at(order[i]))
        ts.negatives.push_back(*item);
    out.push_back(std::move(ts));
  }
  return out;
}

double kd_loss(const Embedding& student, const Embedding& teacher) {
  if (student.size() != teacher.size())
    throw DimensionError("kd_loss: embedding lengths differ (" +
                         std::to_string(student.size()) + " vs " +
                         std::to_string(teacher.size()) + ")");
  if (student.size() == 0) throw DimensionError("kd_loss: empty embedding");
  return (student.cast<double>() - teacher.cast<double>()).squaredNorm() /
         static_cast<double>(student.size());
}

Eigen::VectorXd kd_loss_gradient(const Embedding& student,
                                 const Embedding& teacher) {
  if (student.size() != teacher.size())
    throw DimensionError("kd_loss_gradient: embedding lengths differ");
  return 2.0 * (student.cast<double>() - teacher.cast<double>()) /
         static_cast<double>(student.size());
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const Eigen::Map<const Eigen::VectorXd> v(values.data(),
                                            static_cast<Index>(values.size()));
  MeanStd out;
  out.mean = v.mean();
  if (values.size() > 1)
    out.std = std::sqrt((v.array() - out.mean).square().sum() /
                        static_cast<double>(values.size() - 1));
  return out;
}

EpisodeReport evaluate_episodes(const std::vector<TrialSet>& trials,
                                std::span<const double> fars) {
  EpisodeReport r;
  r.fars.assign(fars.begin(), fars.end());
  r.accuracy.resize(fars.size());
  for (const TrialSet& t : trials) {
    const PrototypeStore store = enroll_trial(t);
    for (std::size_t i = 0; i < fars.size(); ++i)
      r.accuracy[i].push_back(acc_at_far(t, store, fars[i]).rate);
    const TrialScores s = trial_scores(t, store);
    r.auc.push_back(auroc(s.positive, s.negative));
  }
  return r;
}

namespace {

// Shortest round-trip text for a FAR given in percent, e.g. "1" or "0.5".
std::string percent(double far) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << far * 100.0;
  return os.str();
}

}  // namespace

std::string EpisodeReport::format(bool per_trial) const {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(6);
  os << "trials " << auc.size() << '\n';
  for (std::size_t i = 0; i < fars.size(); ++i) {
    const MeanStd m = mean_std(accuracy[i]);
    os << "ACC@" << percent(fars[i]) << "% mean " << m.mean << " std " << m.std
       << '\n';
  }
  const MeanStd a = mean_std(auc);
  os << "AUROC mean " << a.mean << " std " << a.std << '\n';
  if (per_trial) {
    for (std::size_t t = 0; t < auc.size(); ++t) {
      os << "trial " << t;
      for (std::size_t i = 0; i < fars.size(); ++i)
        os << " acc@" << percent(fars[i]) << "% " << accuracy[i][t];
      os << " auroc " << auc[t] << '\n';
    }
  }
  return os.str();
}

ScoreList read_score_list(std::istream& in) {
  ScoreList out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string label;
    if (!(ls >> label) || label[0] == '#') continue;
    double value;
    if (!(ls >> value))
      throw FormatError("score list line " + std::to_string(line_no) +
                        ": missing score");
    if (label == "target" || label == "pos" || label == "positive" ||
        label == "1")
      out.positive.push_back(value);
    else if (label == "nontarget" || label == "neg" || label == "negative" ||
             label == "0")
      out.negative.push_back(value);
    else
      throw FormatError("score list line " + std::to_string(line_no) +
                        ": unknown label '" + label + "'");
  }
  return out;
}

ScoreList load_score_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open score list " + path.string());
  return read_score_list(in);
}

void write_score_list(std::ostream& out, const ScoreList& scores) {
  out.precision(std::numeric_limits<double>::max_digits10);
  for (double s : scores.positive) out << "target " << s << '\n';
  for (double s : scores.negative) out << "nontarget " << s << '\n';
}

}  // namespace edgespot
