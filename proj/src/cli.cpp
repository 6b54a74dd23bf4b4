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
#include "edgespot/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "edgespot/error.hpp"
#include "edgespot/eval.hpp"
#include "edgespot/footprint.hpp"
#include "edgespot/frontend.hpp"
#include "edgespot/proto.hpp"
#include "edgespot/weights.hpp"

namespace fs = std::filesystem;

namespace edgespot {
namespace {

// Raised for problems the user fixes by changing flags (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw FormatError(std::string(what) + " not found: " + p.string());
}

void require_fars(const std::vector<double>& fars) {
  for (double f : fars)
    if (!(f > 0.0 && f < 1.0))
      throw UsageError("FAR values must lie in (0, 1)");
}

std::string format_double(double v, int precision = 6) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Shortest text for a FAR in percent, e.g. "1" or "0.5".
std::string format_percent(double far) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << far * 100.0;
  return os.str();
}

std::vector<fs::path> sorted_subdirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      dirs.push_back(entry.path());
    } else if (entry.path().filename().string().rfind('.', 0) != 0) {
      throw FormatError("layout: unexpected file " + entry.path().string() +
                        " (expected one directory per label)");
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

ModelParams load_params(const fs::path& weights) {
  require_exists(weights, "weights");
  const WeightBundle bundle = load_bundle(weights);
  return ModelParams::from_bundle(bundle, bundle.config());
}

// --- subcommands ---------------------------------------------------------

struct FeaturizeArgs {
  fs::path audio;
  fs::path output;
  bool pcen = false;
  fs::path weights;
};

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out) {
  require_exists(a.audio, "audio");
  PcenParams params;
  if (!a.weights.empty()) {
    require_exists(a.weights, "weights");
    if (auto p = load_bundle(a.weights).pcen()) params = *p;
  }
  const MelSpectrogram mel = melspec(read_wav(a.audio));
  Record rec{"mel", mel.energies()};
  if (a.pcen) rec = {"pcen", pcen(mel, params)};
  save_tensors(a.output, {rec});
  out << a.output.string() << ' ' << rec.name << ' '
      << shape_string(rec.tensor.shape()) << '\n';
  return kExitOk;
}

struct InitArgs {
  std::string variant = "edgespot";
  int tau = 1;
  std::uint64_t seed = 0;
  fs::path output;
};

int cmd_init(const InitArgs& a, std::ostream& out) {
  const ModelConfig cfg = ModelConfig::make(parse_variant(a.variant), a.tau);
  const std::size_t n = save_bundle(random_bundle(cfg, a.seed), a.output);
  out << a.output.string() << ' ' << cfg.label() << ' ' << n << " bytes\n";
  return kExitOk;
}

struct CalibrateArgs {
  fs::path weights;
  fs::path data;
  fs::path output;
};

// Collects every WAV under `root`, one directory level deep.
std::vector<fs::path> collect_wavs(const fs::path& root) {
  std::vector<fs::path> files = list_wavs(root);
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory())
      for (auto& f : list_wavs(entry.path())) files.push_back(f);
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  require_exists(a.weights, "weights");
  require_exists(a.data, "clip directory");
  const auto files = collect_wavs(a.data);
  if (files.empty())
    throw FormatError("calibrate: no .wav files under " + a.data.string());
  std::vector<MelSpectrogram> pool;
  pool.reserve(files.size());
  for (const auto& f : files) pool.push_back(melspec(read_wav(f)));
  const WeightBundle calibrated = calibrate_norms(load_bundle(a.weights), pool);
  save_bundle(calibrated, a.output);
  out << a.output.string() << ' ' << calibrated.config().label()
      << " norms calibrated on " << pool.size() << " clips\n";
  return kExitOk;
}

struct EnrollArgs {
  fs::path weights;
  fs::path root;
  std::vector<fs::path> dirs;
  Index shots = 1;
  double threshold = 0.5;
  fs::path output;
};

int cmd_enroll(const EnrollArgs& a, std::ostream& out) {
  if (a.root.empty() && a.dirs.empty())
    throw UsageError("enroll: give --root or at least one --dir");
  if (a.shots < 1) throw UsageError("enroll: --shots must be >= 1");
  std::vector<fs::path> dirs = a.dirs;
  if (!a.root.empty()) {
    require_exists(a.root, "enrollment root");
    for (auto& d : sorted_subdirs(a.root)) dirs.push_back(d);
  }
  std::set<std::string> labels;
  for (const auto& d : dirs) {
    require_exists(d, "keyword directory");
    const std::string label = d.filename().string();
    if (!labels.insert(label).second)
      throw FormatError("enroll: duplicate keyword '" + label + "'");
  }
  const ModelParams params = load_params(a.weights);
  PrototypeStore store(a.threshold);
  for (const auto& d : dirs) {
    const auto wavs = list_wavs(d);
    if (static_cast<Index>(wavs.size()) < a.shots)
      throw FormatError("enroll: keyword '" + d.filename().string() +
                        "' has " + std::to_string(wavs.size()) +
                        " clips, need " + std::to_string(a.shots));
    std::vector<Embedding> shots;
    for (Index k = 0; k < a.shots; ++k)
      shots.push_back(embed_file(wavs[static_cast<std::size_t>(k)], params));
    store.add(enroll(d.filename().string(), shots));
  }
  save_store(a.output, store);
  out << a.output.string() << ' ' << store.size() << " prototypes\n";
  return kExitOk;
}

struct DetectArgs {
  fs::path store;
  fs::path weights;
  std::vector<fs::path> inputs;
  std::optional<double> threshold;
  std::optional<double> far;
  fs::path negatives;
};

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  if (a.far && a.negatives.empty())
    throw UsageError("detect: --far requires --negatives");
  if (a.far) require_fars({*a.far});
  require_exists(a.store, "prototype store");
  PrototypeStore store = load_store(a.store);
  std::vector<fs::path> files;
  for (const auto& in : a.inputs) {
    require_exists(in, "input");
    if (fs::is_directory(in)) {
      for (auto& f : list_wavs(in)) files.push_back(f);
    } else {
      files.push_back(in);
    }
  }
  const ModelParams params = load_params(a.weights);
  double threshold = store.threshold();
  if (a.threshold) threshold = *a.threshold;
  if (a.far) {
    require_exists(a.negatives, "negatives directory");
    std::vector<double> neg;
    for (const auto& f : list_wavs(a.negatives))
      neg.push_back(detect(embed_file(f, params), store).score);
    threshold = calibrate_threshold(neg, *a.far);
    out << "# threshold " << format_double(threshold, 9) << " at FAR "
        << *a.far << " over " << neg.size() << " negatives\n";
  }
  for (const auto& f : files) {
    const Detection d = detect(embed_file(f, params), store, threshold);
    out << f.string() << ' ' << d.label << ' ' << format_double(d.score) << ' '
        << (d.accepted ? "accept" : "reject") << '\n';
  }
  return kExitOk;
}

struct EvaluateArgs {
  fs::path data;
  fs::path weights;
  Index shots = 1;
  Index trials = 100;
  Index targets = 11;
  Index unknown = 25;
  std::vector<double> fars{0.01, 0.05};
  std::uint64_t seed = 0;
  bool per_trial = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  require_fars(a.fars);
  require_exists(a.data, "dataset root");
  const auto dirs = sorted_subdirs(a.data);
  const ModelParams params = load_params(a.weights);
  std::vector<LabeledEmbedding> dataset;
  for (const auto& d : dirs) {
    const auto wavs = list_wavs(d);
    if (wavs.empty())
      throw FormatError("layout: label directory " + d.string() +
                        " contains no .wav files");
    for (const auto& f : wavs)
      dataset.push_back({d.filename().string(),
                         fs::relative(f, a.data).generic_string(),
                         embed_file(f, params)});
  }
  const auto episodes =
      make_episodes(dataset, a.targets, a.unknown, a.shots, a.trials, a.seed);
  out << evaluate_episodes(episodes, a.fars).format(a.per_trial);
  return kExitOk;
}

struct CountArgs {
  std::string variant = "edgespot";
  int tau = 1;
  bool compare = false;
  bool trace = false;
  std::string format = "text";
};

int cmd_count(const CountArgs& a, std::ostream& out) {
  const ModelConfig cfg = ModelConfig::make(parse_variant(a.variant), a.tau);
  const Footprint fp = footprint(cfg);
  const bool machine = a.format == "csv";
  out << format_footprint(fp, machine);
  if (a.trace) {
    ShapeTrace trace;
    const MelSpectrogram silent(TensorF({kMelBands, kFrames}));
    embed(silent, ModelParams::from_bundle(random_bundle(cfg, 0), cfg), &trace);
    out << format_trace(trace);
  }
  if (a.compare) {
    const auto ref = reference_footprint(cfg.variant, cfg.width);
    if (!ref) {
      out << "no published reference for " << cfg.label() << '\n';
    } else {
      const double dp = 100.0 * (fp.total_params() / ref->params - 1.0);
      const double dm = 100.0 * (fp.total_macs() / ref->macs - 1.0);
      if (machine) {
        out << "reference,params," << format_double(ref->params, 0) << ",macs,"
            << format_double(ref->macs, 0) << ",dev_params_pct,"
            << format_double(dp, 2) << ",dev_macs_pct," << format_double(dm, 2)
            << '\n';
      } else {
        out << "reference " << cfg.label() << ": params "
            << format_double(ref->params, 0) << " vs " << fp.total_params()
            << " (" << format_double(dp, 2) << "%), macs "
            << format_double(ref->macs, 0) << " vs " << fp.total_macs() << " ("
            << format_double(dm, 2) << "%)\n";
      }
    }
  }
  return kExitOk;
}

struct MetricsArgs {
  fs::path scores;
  std::vector<double> fars{0.01, 0.05};
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  require_fars(a.fars);
  require_exists(a.scores, "score list");
  const ScoreList s = load_score_list(a.scores);
  for (double far : a.fars) {
    const DetPoint p = det_at_far(s.positive, s.negative, far);
    out << "DET@" << format_percent(far) << "% " << format_double(p.rate)
        << " threshold " << format_double(p.threshold, 9) << '\n';
  }
  out << "AUROC " << format_double(auroc(s.positive, s.negative)) << '\n';
  return kExitOk;
}

}  // namespace

std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Embedding embed_file(const fs::path& wav, const ModelParams& params) {
  return embed(melspec(read_wav(wav)), params);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Few-shot keyword spotting runtime", "edgespot"};
  app.require_subcommand(1);

  FeaturizeArgs fa;
  auto* featurize = app.add_subcommand("featurize", "WAV -> mel/PCEN tensor container");
  featurize->add_option("audio", fa.audio, "16 kHz mono WAV")->required();
  featurize->add_option("-o,--output", fa.output, "output .est file")->required();
  featurize->add_flag("--pcen", fa.pcen, "apply PCEN");
  featurize->add_option("--weights", fa.weights, "take PCEN scalars from a bundle");

  InitArgs ia;
  auto* init = app.add_subcommand("init-weights", "write a seeded random weight bundle");
  init->add_option("--variant", ia.variant, "edgespot | bcresnet");
  init->add_option("--tau", ia.tau, "width multiplier");
  init->add_option("--seed", ia.seed);
  init->add_option("-o,--output", ia.output)->required();

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand(
      "calibrate", "re-estimate norm running statistics on unlabeled clips");
  calibrate->add_option("--weights", cal.weights)->required();
  calibrate->add_option("--data", cal.data, "WAV directory, searched one level deep")
      ->required();
  calibrate->add_option("-o,--output", cal.output)->required();

  EnrollArgs ea;
  auto* enroll_cmd = app.add_subcommand("enroll", "build a prototype store");
  enroll_cmd->add_option("--weights", ea.weights)->required();
  enroll_cmd->add_option("--root", ea.root, "directory with one subdirectory per keyword");
  enroll_cmd->add_option("--dir", ea.dirs, "keyword directory (repeatable)");
  enroll_cmd->add_option("-k,--shots", ea.shots, "enrollment shots per keyword");
  enroll_cmd->add_option("--threshold", ea.threshold);
  enroll_cmd->add_option("-o,--output", ea.output)->required();

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "score clips against a prototype store");
  detect_cmd->add_option("inputs", da.inputs, "WAV files or directories")->required();
  detect_cmd->add_option("--store", da.store)->required();
  detect_cmd->add_option("--weights", da.weights)->required();
  auto* thr = detect_cmd->add_option("--threshold", da.threshold);
  auto* far = detect_cmd->add_option("--far", da.far, "calibrate on --negatives");
  thr->excludes(far);
  detect_cmd->add_option("--negatives", da.negatives, "directory of non-keyword clips");

  EvaluateArgs va;
  auto* evaluate = app.add_subcommand("evaluate", "K-shot episodes over a label-per-directory dataset");
  evaluate->add_option("--data", va.data)->required();
  evaluate->add_option("--weights", va.weights)->required();
  evaluate->add_option("-k,--shots", va.shots);
  evaluate->add_option("--trials", va.trials);
  evaluate->add_option("--targets", va.targets);
  evaluate->add_option("--unknown", va.unknown);
  evaluate->add_option("--far", va.fars)->delimiter(',');
  evaluate->add_option("--seed", va.seed);
  evaluate->add_flag("--per-trial", va.per_trial);

  CountArgs ca;
  auto* count = app.add_subcommand("count", "parameter and MAC footprint");
  count->add_option("--variant", ca.variant);
  count->add_option("--tau", ca.tau);
  count->add_flag("--compare-paper", ca.compare, "print published reference values");
  count->add_flag("--trace", ca.trace, "append the layer shape trace");
  count->add_option("--format", ca.format)->check(CLI::IsMember({"text", "csv"}));

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "DET@FAR and AUROC from a score list");
  metrics->add_option("--scores", ma.scores)->required();
  metrics->add_option("--far", ma.fars)->delimiter(',');

  std::vector<const char*> argv{"edgespot"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*featurize) return cmd_featurize(fa, out);
    if (*init) return cmd_init(ia, out);
    if (*calibrate) return cmd_calibrate(cal, out);
    if (*enroll_cmd) return cmd_enroll(ea, out);
    if (*detect_cmd) return cmd_detect(da, out);
    if (*evaluate) return cmd_evaluate(va, out);
    if (*count) return cmd_count(ca, out);
    if (*metrics) return cmd_metrics(ma, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace edgespot
