// Copyright 2026 The ftrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ftrack: formant tracking pipeline driver.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
// Failures print one line: `error: <usage|data|numerical>: <message>`.

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ftrack/classical.hpp"
#include "ftrack/dataset.hpp"
#include "ftrack/eval.hpp"
#include "ftrack/io.hpp"
#include "ftrack/model.hpp"
#include "ftrack/synth.hpp"
#include "ftrack/trainer.hpp"
#include "ftrack/verify.hpp"

namespace fs = std::filesystem;
using namespace ftrack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

[[noreturn]] void usage_error(const std::string& msg) {
  throw Error(Errc::bad_argument, msg, ErrorKind::usage);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Union of every configurable block, filled from a `key = value` file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ExtractOptions extract;
  bool model_keys_seen = false;

  bool set(const std::string& key, const std::string& value) {
    if (model.set(key, value)) {
      model_keys_seen = true;
      return true;
    }
    if (train.set(key, value)) return true;
    if (key == "window_ms") extract.frame.window_ms = std::stod(value);
    else if (key == "hop_ms") extract.frame.hop_ms = std::stod(value);
    else if (key == "preemphasis") extract.preemphasis = std::stod(value);
    else if (key == "remove_dc") extract.remove_dc = value == "true" || value == "1";
    else return false;
    return true;
  }

  void load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) usage_error("cannot open config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        usage_error(path.string() + ":" + std::to_string(lineno) +
                    ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      bool known = false;
      try {
        known = set(key, value);
      } catch (const std::invalid_argument&) {
        usage_error(path.string() + ":" + std::to_string(lineno) + ": bad value for " + key);
      }
      if (!known)
        usage_error(path.string() + ":" + std::to_string(lineno) + ": unknown key '" +
                    key + "'");
    }
  }
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) usage_error(what + " not found: " + p.string());
}

void require_parent(const fs::path& p) {
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    usage_error("output directory does not exist: " + parent.string());
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
  }
  return "data";
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numerical: return kExitNumerical;
  }
  return kExitData;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool allow_any_rate = false;

  RunConfig run_config() const {
    RunConfig rc;
    if (!config.empty()) rc.load(config);
    if (seed) rc.train.seed = *seed;
    return rc;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "seed for every random stream");
  cmd->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_flag("--allow-any-rate", c.allow_any_rate,
                "accept WAV files that are not 16 kHz");
}

struct SynthArgs {
  Index train = 0, val = 0, test = 0;
  std::string out;
  double fricative_fraction = CorpusRanges{}.fricative_fraction;
};

int run_synth(const Common& c, const SynthArgs& a) {
  const RunConfig rc = c.run_config();
  CorpusRanges ranges;
  ranges.fricative_fraction = a.fricative_fraction;
  ranges.max_frames = rc.train.max_frames;
  make_corpus({a.train, a.val, a.test}, rc.train.seed, a.out, ranges);
  std::printf("wrote %lld/%lld/%lld utterances to %s\n",
              static_cast<long long>(a.train), static_cast<long long>(a.val),
              static_cast<long long>(a.test), a.out.c_str());
  return 0;
}

struct FeaturesArgs {
  std::string manifest, out, fit_norm, norm;
};

int run_features(const Common& c, const FeaturesArgs& a) {
  const RunConfig rc = c.run_config();
  require_file(a.manifest, "manifest");
  if (!a.norm.empty()) require_file(a.norm, "norm stats");
  fs::create_directories(a.out);
  const auto entries = read_manifest(a.manifest);
  std::vector<FeatureMatrix> feats;
  for (const auto& e : entries)
    feats.push_back(extract_features(read_wav(e.audio, c.allow_any_rate), rc.extract));
  std::optional<NormStats> stats;
  if (!a.fit_norm.empty()) {
    stats = fit_norm(std::span<const FeatureMatrix>(feats));
    write_norm_stats(a.fit_norm, *stats);
  } else if (!a.norm.empty()) {
    stats = read_norm_stats(a.norm);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const FeatureMatrix f = stats ? apply_norm(feats[i], *stats) : feats[i];
    write_feature_file(fs::path(a.out) / (entries[i].audio.stem().string() + ".feat"), f);
  }
  std::printf("wrote %zu feature files to %s\n", entries.size(), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string train_manifest, val_manifest, out, log, norm_out;
  std::optional<Index> epochs;
  bool quiet = false;
};

int run_train(const Common& c, const TrainArgs& a) {
  RunConfig rc = c.run_config();
  if (a.epochs) rc.train.max_epochs = *a.epochs;
  rc.model.validate();
  rc.train.validate();
  require_file(a.train_manifest, "training manifest");
  require_file(a.val_manifest, "validation manifest");
  require_parent(a.out);
  if (!a.log.empty()) require_parent(a.log);
  const fs::path norm_out = a.norm_out.empty() ? fs::path(a.out + ".norm") : fs::path(a.norm_out);
  require_parent(norm_out);

  LoadOptions lo;
  lo.extract = rc.extract;
  lo.allow_any_rate = c.allow_any_rate;
  std::vector<Utterance> train_set = load_dataset(a.train_manifest, lo);
  std::vector<Utterance> val_set = load_dataset(a.val_manifest, lo);
  const NormStats stats = fit_norm(std::span<const Utterance>(train_set));
  write_norm_stats(norm_out, stats);
  apply_norm(train_set, stats);
  apply_norm(val_set, stats);

  TrainRecord live;
  TrainHooks hooks;
  hooks.checkpoint = fs::path(a.out);
  hooks.on_epoch = [&](const EpochRecord& r, const ModelWeights&, const ModelWeights&) {
    live.epochs.push_back(r);
    if (!a.log.empty()) write_file_atomic(a.log, live.to_csv());
    if (!a.quiet)
      std::fprintf(stderr, "epoch %3lld  train %.6f  val %.6f  lr %g  %.1fs\n",
                   static_cast<long long>(r.epoch), r.train_loss, r.val_loss, r.lr,
                   r.seconds);
    return true;
  };
  const TrainResult result = train(rc.model, rc.train, train_set, val_set, hooks);
  save(result.best, a.out);
  if (!a.log.empty()) write_file_atomic(a.log, result.record.to_csv());
  std::printf("best epoch %lld, validation loss %.6f\n",
              static_cast<long long>(result.record.best_epoch),
              result.record.epochs[result.record.best_epoch - 1].val_loss);
  return 0;
}

struct TrackArgs {
  std::string model, norm, in, out;
};

int run_track(const Common& c, const TrackArgs& a) {
  const RunConfig rc = c.run_config();
  require_file(a.model, "model");
  require_file(a.norm, "norm stats");
  require_file(a.in, "input audio");
  require_parent(a.out);
  const ModelWeights w = rc.model_keys_seen ? load(a.model, rc.model) : load(a.model);
  const NormStats stats = read_norm_stats(a.norm);
  const AudioClip clip = read_wav(a.in, c.allow_any_rate);
  const FeatureMatrix f = apply_norm(extract_features(clip, rc.extract), stats);
  const MatrixX<double> hz = predict_hz(w, f);
  write_track_csv(a.out, to_track(hz, rc.extract.frame, clip.sample_rate));
  return 0;
}

struct BaselineArgs {
  std::string in, out;
  BaselineConfig cfg;
};

int run_baseline(const Common& c, BaselineArgs a) {
  const RunConfig rc = c.run_config();
  require_file(a.in, "input audio");
  require_parent(a.out);
  a.cfg.analysis = rc.extract;
  const AudioClip clip = read_wav(a.in, c.allow_any_rate);
  write_track_csv(a.out, track_baseline(clip, a.cfg));
  return 0;
}

struct EvalArgs {
  std::vector<std::string> pred, ref;
  std::string classmap, out, plot_data;
  Index transition_window = 3;
  bool quiet = false;
};

int run_eval(const Common&, const EvalArgs& a) {
  if (a.pred.size() != a.ref.size())
    usage_error("--pred and --ref must be given the same number of times");
  if (a.transition_window < 0) usage_error("--transition-window must be >= 0");
  if (!a.plot_data.empty() && a.pred.size() != 1)
    usage_error("--plot-data needs exactly one --pred/--ref pair");
  for (const auto& p : a.pred) require_file(p, "prediction");
  for (const auto& r : a.ref) require_file(r, "reference");
  if (!a.out.empty()) require_parent(a.out);
  const PhoneClassMap map =
      a.classmap.empty() ? PhoneClassMap::timit_default() : PhoneClassMap::from_file(a.classmap);
  std::vector<TrackPair> pairs;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const bool label_pred = has_label_columns(a.pred[i]);
    const FormantTrack pred = label_pred ? read_label_csv(a.pred[i]) : read_track_csv(a.pred[i]);
    pairs.push_back(reference_pair(pred, read_label_csv(a.ref[i]), label_pred));
  }
  EvalConfig cfg;
  cfg.transition_window = a.transition_window;
  const EvalReport report = evaluate(pairs, map, cfg);
  if (!a.out.empty()) write_file_atomic(a.out, report.to_csv());
  if (!a.plot_data.empty()) write_file_atomic(a.plot_data, plot_data_csv(pairs.front()));
  if (!a.quiet) std::fputs(report.to_table().c_str(), stdout);
  return 0;
}

struct GradcheckArgs {
  Index batch = 2, time = 16;
};

int run_gradcheck(const Common& c, const GradcheckArgs& a) {
  RunConfig rc;
  rc.model = tiny_model_config();
  if (!c.config.empty()) rc.load(c.config);
  GradSuiteOptions opt;
  opt.batch = a.batch;
  opt.time = a.time;
  if (c.seed) opt.seed = *c.seed;
  const auto rows = gradcheck_suite(rc.model, opt);
  bool ok = true;
  std::printf("%-16s %-9s %14s %8s  %s\n", "layer", "kind", "max_rel_error", "coords",
              "worst");
  for (const auto& r : rows) {
    const double limit = r.linear ? 1e-6 : 1e-4;
    const bool pass = r.max_rel_error < limit;
    ok = ok && pass;
    std::printf("%-16s %-9s %14.3e %8lld  %s%s\n", r.layer.c_str(),
                r.linear ? "linear" : "nonlinear", r.max_rel_error,
                static_cast<long long>(r.coordinates), r.worst.c_str(),
                pass ? "" : "  FAIL");
  }
  if (!ok)
    throw Error(Errc::generic, "gradient check exceeded tolerance", ErrorKind::numerical);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ftrack: dilated-convolution formant tracker"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ftrack 0.1.0");

  Common common;
  SynthArgs synth;
  FeaturesArgs features;
  TrainArgs train_args;
  TrackArgs track;
  BaselineArgs baseline;
  EvalArgs eval;
  GradcheckArgs grad;

  auto* s = app.add_subcommand("synth", "generate the synthetic corpus");
  add_common(s, common);
  s->add_option("--train", synth.train, "training utterances")->required()->check(CLI::PositiveNumber);
  s->add_option("--val", synth.val, "validation utterances")->required()->check(CLI::PositiveNumber);
  s->add_option("--test", synth.test, "test utterances")->required()->check(CLI::PositiveNumber);
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--fricative-fraction", synth.fricative_fraction,
                "share of utterances with a fricative segment")
      ->check(CLI::Range(0.0, 1.0));

  auto* f = app.add_subcommand("features", "extract LPCC + cepstrum features");
  add_common(f, common);
  f->add_option("--manifest", features.manifest, "manifest of audio, labels")->required();
  f->add_option("--out", features.out, "output directory")->required();
  auto* fit = f->add_option("--fit-norm", features.fit_norm, "fit and write norm stats");
  auto* use = f->add_option("--norm", features.norm, "apply existing norm stats");
  fit->excludes(use);

  auto* t = app.add_subcommand("train", "train the tracker");
  add_common(t, common);
  t->add_option("--train-manifest", train_args.train_manifest, "training manifest")->required();
  t->add_option("--val-manifest", train_args.val_manifest, "validation manifest")->required();
  t->add_option("--out", train_args.out, "best weights")->required();
  t->add_option("--log", train_args.log, "per-epoch record CSV");
  t->add_option("--norm-out", train_args.norm_out, "norm stats (default <out>.norm)");
  t->add_option("--epochs", train_args.epochs, "override max_epochs")->check(CLI::PositiveNumber);
  t->add_flag("--quiet", train_args.quiet, "no per-epoch progress");

  auto* k = app.add_subcommand("track", "track formants with a trained model");
  add_common(k, common);
  k->add_option("--model", track.model, "weights file")->required();
  k->add_option("--norm", track.norm, "norm stats from training")->required();
  k->add_option("--in", track.in, "16 kHz mono PCM16 WAV")->required();
  k->add_option("--out", track.out, "track CSV")->required();

  auto* b = app.add_subcommand("baseline", "LPC root-picking tracker");
  add_common(b, common);
  b->add_option("--in", baseline.in, "16 kHz mono PCM16 WAV")->required();
  b->add_option("--out", baseline.out, "track CSV")->required();
  b->add_option("--order", baseline.cfg.lpc_order, "LPC order")->check(CLI::Range(2, 40));
  b->add_option("--max-bandwidth", baseline.cfg.max_bandwidth_hz, "candidate bandwidth limit (Hz)");
  b->add_option("--min-freq", baseline.cfg.min_frequency_hz, "lowest admissible formant (Hz)");
  b->add_flag("--median", baseline.cfg.median, "3-frame median smoothing");

  auto* e = app.add_subcommand("eval", "MAE / MAPE report");
  add_common(e, common);
  e->add_option("--pred", eval.pred, "prediction track CSV (repeatable)")->required();
  e->add_option("--ref", eval.ref, "reference label CSV (repeatable)")->required();
  e->add_option("--classmap", eval.classmap, "phone class map (default: built-in)");
  e->add_option("--out", eval.out, "report CSV");
  e->add_option("--transition-window", eval.transition_window, "frames on each side of a boundary");
  e->add_option("--plot-data", eval.plot_data, "per-frame CSV for plotting");
  e->add_flag("--quiet", eval.quiet, "no table on stdout");

  auto* g = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(g, common);
  g->add_option("--batch", grad.batch, "sequences")->check(CLI::PositiveNumber);
  g->add_option("--time", grad.time, "frames per sequence")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForVersion& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::fprintf(stderr, "error: usage: %s\n", one_line(err.what()).c_str());
    return kExitUsage;
  }

  try {
    Eigen::setNbThreads(common.threads);
    if (s->parsed()) return run_synth(common, synth);
    if (f->parsed()) return run_features(common, features);
    if (t->parsed()) return run_train(common, train_args);
    if (k->parsed()) return run_track(common, track);
    if (b->parsed()) return run_baseline(common, baseline);
    if (e->parsed()) return run_eval(common, eval);
    if (g->parsed()) return run_gradcheck(common, grad);
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s: %s\n", kind_name(err.kind()), one_line(err.what()).c_str());
    return exit_code(err.kind());
  } catch (const fs::filesystem_error& err) {
    std::fprintf(stderr, "error: data: %s\n", one_line(err.what()).c_str());
    return kExitData;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: data: %s\n", one_line(err.what()).c_str());
    return kExitData;
  }
  return kExitUsage;
}
