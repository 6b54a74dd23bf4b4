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
#ifndef EDGESPOT_EVAL_HPP_
#define EDGESPOT_EVAL_HPP_

// Open-set few-shot evaluation: FAR-calibrated detection and accuracy,
// rank-statistic AUROC, seeded episode generation and the distillation loss.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "edgespot/model.hpp"
#include "edgespot/proto.hpp"

namespace edgespot {

struct LabeledEmbedding {
  std::string label;
  std::string id;  // unique per source utterance
  Embedding embedding;
};

// One evaluation episode: K enrollment shots per target label, positive
// tests drawn from the targets and negatives from held-out labels.
struct TrialSet {
  std::map<std::string, std::vector<LabeledEmbedding>> enrollment;
  std::vector<LabeledEmbedding> positives;
  std::vector<LabeledEmbedding> negatives;
  Index shots = 0;
  std::uint64_t seed = 0;
};

struct DetPoint {
  double far = 0.0;
  double rate = 0.0;  // detection rate or accuracy
  double threshold = 0.0;
};

// Threshold from calibrate_threshold(neg, far); rate = fraction of
// positives >= threshold.
DetPoint det_at_far(std::span<const double> positives,
                    std::span<const double> negatives, double far);

// Builds one prototype per enrolled label.
PrototypeStore enroll_trial(const TrialSet& trial, double threshold = 0.5);

// Negative score = best score over all prototypes; positive score = score
// against the true label's prototype.
struct TrialScores {
  std::vector<double> positive;
  std::vector<double> negative;
};
TrialScores trial_scores(const TrialSet& trial, const PrototypeStore& store);

// Accuracy = fraction of positives that are accepted at the calibrated
// threshold and whose best label is the true one.
DetPoint acc_at_far(const TrialSet& trial, const PrototypeStore& store,
                    double far);

// Mann-Whitney AUROC with ties counted one half.
double auroc(std::span<const double> positives,
             std::span<const double> negatives);

std::vector<TrialSet> make_episodes(std::span<const LabeledEmbedding> dataset,
                                    Index n_targets, Index n_unknown,
                                    Index shots, Index n_trials,
                                    std::uint64_t seed);

struct KdConfig {
  double lambda = 5e-5;  // weight of the angular-margin term
  Index dim = kEmbeddingDim;

  double total(double kd, double margin_loss) const {
    return kd + lambda * margin_loss;
  }
};

// Mean squared difference over embedding components.
double kd_loss(const Embedding& student, const Embedding& teacher);
// d kd_loss / d student = 2 (student - teacher) / dim.
Eigen::VectorXd kd_loss_gradient(const Embedding& student,
                                 const Embedding& teacher);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct EpisodeReport {
  std::vector<double> fars;
  std::vector<std::vector<double>> accuracy;  // [far][trial]
  std::vector<double> auc;                    // [trial]

  std::string format(bool per_trial = false) const;
};

EpisodeReport evaluate_episodes(const std::vector<TrialSet>& trials,
                                std::span<const double> fars);

// Score-list exchange: one "label score" pair per line, where label is
// target/pos/positive/1 or nontarget/neg/negative/0. Blank lines and lines
// starting with '#' are skipped.
struct ScoreList {
  std::vector<double> positive;
  std::vector<double> negative;
};
ScoreList read_score_list(std::istream& in);
ScoreList load_score_list(const std::filesystem::path& path);
void write_score_list(std::ostream& out, const ScoreList& scores);

}  // namespace edgespot

#endif  // EDGESPOT_EVAL_HPP_
