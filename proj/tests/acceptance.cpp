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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   ftrack_acceptance [--work DIR] [--reuse] [N ...]
//
// Criteria 7, 8 and 9 share two end-to-end CLI runs kept under DIR.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ftrack/classical.hpp"
#include "ftrack/dataset.hpp"
#include "ftrack/dsp.hpp"
#include "ftrack/io.hpp"
#include "ftrack/layers.hpp"
#include "ftrack/model.hpp"
#include "ftrack/synth.hpp"
#include "ftrack/trainer.hpp"
#include "ftrack/verify.hpp"
#include "metric_oracle.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ftrack;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path g_work = "acceptance_work";
bool g_reuse = false;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Tensor3<double> random_features(Index b, Index t, Index c, std::uint64_t seed) {
  auto g = oracle::rng(seed);
  Tensor3<double> x(b, t, c);
  x.data = oracle::random_matrix(b * t, c, g);
  return x;
}

// ---------------------------------------------------------------------------

Outcome c1_gradcheck() {
  const auto reports = gradcheck_suite(tiny_model_config());
  double net = -1, lin = 0;
  for (const auto& r : reports) {
    if (r.layer == "network") net = r.max_rel_error;
    if (r.linear) lin = std::max(lin, r.max_rel_error);
  }
  const bool ok = net >= 0 && net < 1e-4 && lin < 1e-6;
  return {ok, "network " + fmt("%.2e", net) + ", linear ops " + fmt("%.2e", lin)};
}

Outcome c2_receptive() {
  const ModelConfig cfg;
  const ModelWeights w = build(cfg, 3);
  const Index T = 90, t = 45;
  const Tensor3<double> x = random_features(1, T, cfg.input_dim, 4);
  const Mask mask(1, T);
  const auto base = forward(w, x, mask, Mode::infer);
  Index bad = 0;
  for (Index s = 0; s < T; ++s) {
    Tensor3<double> y = x;
    y.data.row(s).array() += 1.5;
    const auto p = forward(w, y, mask, Mode::infer);
    double change = 0;
    for (int k = 0; k < 3; ++k) change += std::abs(p[k](t) - base[k](t));
    const bool inside = std::abs(s - t) <= 21;
    if (inside ? !(change > 0.0) : change != 0.0) ++bad;
  }
  return {bad == 0, std::to_string(T) + " perturbed frames, " + std::to_string(bad) +
                        " violations"};
}

Outcome c3_masking() {
  const ModelConfig cfg;
  const ModelWeights w = build(cfg, 9);
  const Index B = 3, T = 60;
  Mask mask(B, T);
  for (Index t = 41; t < T; ++t) mask.valid(T + t) = false;
  for (Index t = 17; t < T; ++t) mask.valid(2 * T + t) = false;
  const Tensor3<double> x = random_features(B, T, cfg.input_dim, 10);
  Tensor3<double> x2 = x;
  auto g = oracle::rng(11);
  for (Index r = 0; r < B * T; ++r)
    if (!mask.valid(r)) x2.data.row(r) = 40.0 * oracle::random_vector(cfg.input_dim, g).transpose();
  std::array<VectorX<double>, 3> targets;
  for (auto& v : targets) v = oracle::random_vector(B * T, g);

  auto grads = [&](const Tensor3<double>& in, double& loss) {
    ForwardCache<double> cache;
    const auto preds = forward(w, in, mask, Mode::train, 77, &cache);
    std::array<VectorX<double>, 3> d;
    loss = combined_loss<double>(preds, targets, mask, {}, &d);
    return backward(w, cache, mask, d);
  };
  double l1 = 0, l2 = 0;
  const ModelWeights g1 = grads(x, l1);
  const ModelWeights g2 = grads(x2, l2);
  std::vector<MatrixX<double>> a, b;
  for_each_tensor(g1, [&](const std::string&, const auto& m, bool) { a.emplace_back(m); });
  for_each_tensor(g2, [&](const std::string&, const auto& m, bool) { b.emplace_back(m); });
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, (a[i] - b[i]).cwiseAbs().maxCoeff());
  const double dl = std::abs(l1 - l2);
  return {dl < 1e-12 && worst < 1e-12,
          "loss diff " + fmt("%.1e", dl) + ", max grad diff " + fmt("%.1e", worst)};
}

Outcome c4_dsp() {
  auto g = oracle::rng(404);
  double lev = 0;
  for (int i = 0; i < 100; ++i) {
    const Index p = 1 + i % 17;
    const Eigen::VectorXd x = oracle::random_vector(400, g);
    const Eigen::VectorXd r = oracle::autocorr(x, p);
    const Eigen::VectorXd ref = oracle::toeplitz_lpc(r, p);
    lev = std::max(lev, (levinson(r, p).a - ref).norm() / ref.norm());
  }
  double cep = 0;
  for (int i = 0; i < 100; ++i) {
    const Index p = 1 + i % 17;
    const Eigen::VectorXd a = oracle::random_stable_lpc(p, g);
    cep = std::max(cep, (lpc_to_cepstrum(a, 30) - oracle::spectral_cepstrum(a, 30))
                            .cwiseAbs()
                            .maxCoeff());
  }
  double conv = 0;
  for (int i = 0; i < 20; ++i) {
    Tensor3<double> x(2, 31, 7);
    x.data = oracle::random_matrix(62, 7, g);
    const Conv1dParams<double> prm{oracle::random_matrix(21, 5, g),
                                   oracle::random_matrix(1, 5, g)};
    const auto y = dilated_conv1d_same(x, prm, 1);
    const auto ref = oracle::conv1d(x, prm.weight, prm.bias, 1);
    conv = std::max(conv, (y.data - ref.data).cwiseAbs().maxCoeff());
  }
  return {lev < 1e-10 && cep < 1e-6 && conv < 1e-12,
          "levinson " + fmt("%.1e", lev) + ", cepstrum " + fmt("%.1e", cep) + ", conv " +
              fmt("%.1e", conv)};
}

// Mean absolute baseline error per formant over the interior frames of 50
// steady vowels (formants and bandwidths from the corpus ranges). With
// `f0_hz` the source pitch is fixed; otherwise it is drawn from the corpus
// range too.
std::array<double, 3> steady_vowel_mae(std::optional<double> f0_hz, Index* frames) {
  double sum[3] = {0, 0, 0};
  Index n = 0;
  for (std::uint64_t seed = 500; seed < 550; ++seed) {
    TrajectorySpec s = random_spec(seed);
    for (auto& f : s.formants) f.end_hz = f.start_hz;
    s.f0_end_hz = s.f0_start_hz = f0_hz.value_or(s.f0_start_hz);
    s.fricative_s = 0.0;
    const SynthUtterance u = synthesize(s);
    const FormantTrack t = track_baseline(u.audio);
    // Label frame k is centred 10 ms earlier than analysis frame k.
    const auto& lab = u.labels.frames;
    Index first = -1, last = -1;
    for (std::size_t k = 0; k < lab.size(); ++k)
      if (lab[k].is_speech) {
        if (first < 0) first = Index(k);
        last = Index(k);
      }
    for (std::size_t i = 0; i < t.frames.size(); ++i) {
      const Index k = Index(i) + 1;
      if (k < first + 5 || k > last - 5) continue;
      for (int j = 0; j < 3; ++j) sum[j] += std::abs(t.frames[i].hz[j] - s.formants[j].start_hz);
      ++n;
    }
  }
  *frames = n;
  std::array<double, 3> mae;
  for (int j = 0; j < 3; ++j) mae[j] = n ? sum[j] / double(n) : 1e9;
  return mae;
}

Outcome c5_baseline() {
  Index n = 0, n_any = 0;
  const auto mae = steady_vowel_mae(120.0, &n);
  const auto any = steady_vowel_mae(std::nullopt, &n_any);
  return {mae[0] < 30 && mae[1] < 50 && mae[2] < 50,
          "MAE F1 " + fmt("%.1f", mae[0]) + " F2 " + fmt("%.1f", mae[1]) + " F3 " +
              fmt("%.1f", mae[2]) + " Hz over " + std::to_string(n) +
              " frames at f0 120 Hz (f0 80-250 Hz: " + fmt("%.1f", any[0]) + " / " +
              fmt("%.1f", any[1]) + " / " + fmt("%.1f", any[2]) + ")"};
}

Outcome c6_overfit() {
  ModelConfig mc;
  mc.dropout_p = 0.0;
  mc.bn_momentum = 0.9;
  TrainConfig tc;
  tc.max_epochs = 200;
  tc.seed = 1;
  tc.lr_initial = 0.003;
  tc.lr_after_drop = 0.0003;
  tc.lr_drop_epoch = 100;
  CorpusRanges r;
  r.duration_hi_s = 1.0;
  std::vector<Utterance> data;
  for (int i = 0; i < 4; ++i) {
    const SynthUtterance u = synthesize(random_spec(1000 + i, r));
    data.push_back(make_utterance("u" + std::to_string(i), u.audio, u.labels));
  }
  apply_norm(data, fit_norm(data));
  const TrainResult res = train(mc, tc, data, data);
  const double mae = dataset_mae_hz(res.best, data);
  return {mae < 20.0, "train MAE " + fmt("%.2f", mae) + " Hz after " +
                          std::to_string(res.record.epochs.size()) + " epochs"};
}

// ---------------------------------------------------------------------------
// End-to-end runs through the command-line tool.

struct E2E {
  fs::path dir;
  bool ok = false;
  double seconds = 0;
  std::string error;
};

std::vector<std::pair<std::string, std::string>> test_pairs(const fs::path& corpus) {
  std::vector<std::pair<std::string, std::string>> out;
  std::ifstream in(corpus / "test.txt");
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    std::string a = line.substr(0, comma), b = line.substr(comma + 1);
    b.erase(0, b.find_first_not_of(' '));
    out.emplace_back(a, b);
  }
  return out;
}

fs::path pred_path(const fs::path& dir, const std::string& wav) {
  return dir / ("pred_" + fs::path(wav).stem().string() + ".csv");
}

E2E end_to_end(const std::string& name) {
  E2E e;
  e.dir = g_work / name;
  const fs::path stamp = e.dir / "done.txt";
  if (g_reuse && fs::exists(stamp)) {
    std::ifstream in(stamp);
    in >> e.seconds;
    e.ok = true;
    return e;
  }
  fs::remove_all(e.dir);
  fs::create_directories(e.dir);
  const std::string cli = q(FTRACK_CLI_PATH);
  const auto t0 = std::chrono::steady_clock::now();
  auto step = [&](const std::string& cmd) {
    if (!e.error.empty()) return;
    if (run(cmd + " 2>> " + q(e.dir / "stderr.txt")) != 0) e.error = "failed: " + cmd;
  };
  const fs::path corpus = e.dir / "corpus";
  step(cli + " synth --train 200 --val 20 --test 40 --seed 1 --out " + q(corpus) +
       " > /dev/null");
  step(cli + " train --train-manifest " + q(corpus / "train.txt") + " --val-manifest " +
       q(corpus / "val.txt") + " --out " + q(e.dir / "model.bin") + " --log " +
       q(e.dir / "log.csv") + " --quiet");
  std::string preds, refs;
  for (const auto& [wav, lab] : test_pairs(corpus)) {
    const fs::path pred = pred_path(e.dir, wav);
    step(cli + " track --model " + q(e.dir / "model.bin") + " --norm " +
         q(e.dir / "model.bin.norm") + " --in " + q(corpus / wav) + " --out " + q(pred));
    preds += " --pred " + q(pred);
    refs += " --ref " + q(corpus / lab);
  }
  step(cli + " eval" + preds + refs + " --out " + q(e.dir / "report.csv") + " > " +
       q(e.dir / "report.txt"));
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  e.ok = e.error.empty();
  if (e.ok) std::ofstream(stamp) << e.seconds << "\n";
  return e;
}

std::optional<E2E> g_run_a, g_run_b;

const E2E& run_a() {
  if (!g_run_a) g_run_a = end_to_end("run_a");
  return *g_run_a;
}
const E2E& run_b() {
  if (!g_run_b) g_run_b = end_to_end("run_b");
  return *g_run_b;
}

struct ReportRow {
  double mae = 0, mape = 0;
  long frames = 0;
};

std::map<std::string, ReportRow> read_report(const fs::path& path) {
  std::map<std::string, ReportRow> out;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c = metric_oracle::split(line);
    if (c.size() != 6) continue;
    out[c[0] + "/" + c[1] + "/" + c[2]] = {std::strtod(c[3].c_str(), nullptr),
                                           std::strtod(c[4].c_str(), nullptr),
                                           std::strtol(c[5].c_str(), nullptr, 10)};
  }
  return out;
}

Outcome c7_end_to_end() {
  const E2E& e = run_a();
  if (!e.ok) return {false, e.error};
  const auto rep = read_report(e.dir / "report.csv");
  const auto all = rep.find("overall/all/overall");
  const auto f1 = rep.find("overall/all/F1");
  if (all == rep.end() || f1 == rep.end()) return {false, "report lacks overall rows"};
  const bool ok = all->second.mape <= 10.0 && f1->second.mae < 60.0 && e.seconds < 45 * 60;
  return {ok, "MAPE " + fmt("%.2f", all->second.mape) + " %, MAE F1 " +
                  fmt("%.1f", f1->second.mae) + " Hz, pipeline " + fmt("%.0f", e.seconds) +
                  " s"};
}

std::string without_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome c8_determinism() {
  const E2E& a = run_a();
  const E2E& b = run_b();
  if (!a.ok || !b.ok) return {false, a.ok ? b.error : a.error};
  std::vector<std::string> files{"model.bin", "model.bin.norm", "report.csv"};
  for (const auto& [wav, lab] : test_pairs(a.dir / "corpus"))
    files.push_back(pred_path(fs::path{}, wav).string());
  Index differ = 0;
  std::string first;
  for (const auto& f : files)
    if (slurp(a.dir / f) != slurp(b.dir / f) || slurp(a.dir / f).empty()) {
      if (!differ++) first = f;
    }
  // The training log's last column is wall-clock time.
  if (without_last_column(slurp(a.dir / "log.csv")) !=
      without_last_column(slurp(b.dir / "log.csv"))) {
    if (!differ++) first = "log.csv";
  }
  return {differ == 0, std::to_string(files.size() + 1) + " files compared" +
                           (differ ? ", first mismatch " + first : std::string{})};
}

Outcome c9_metrics() {
  const E2E& e = run_a();
  if (!e.ok) return {false, e.error};
  const auto classes =
      metric_oracle::read_classes(fs::path(FTRACK_SOURCE_DIR) / "data" / "phone_classes.txt");
  metric_oracle::Result res;
  for (const auto& [wav, lab] : test_pairs(e.dir / "corpus"))
    metric_oracle::accumulate(res, metric_oracle::read_rows(pred_path(e.dir, wav)),
                              metric_oracle::read_rows(e.dir / "corpus" / lab), classes, 3);
  const auto rep = read_report(e.dir / "report.csv");
  double worst = 0;
  Index mismatched = 0;
  std::set<std::string> keys;
  for (const auto& [k, s] : res.stats) {
    keys.insert(k);
    const auto it = rep.find(k);
    if (it == rep.end() || it->second.frames != s.n) {
      ++mismatched;
      continue;
    }
    worst = std::max(worst, std::abs(it->second.mae - s.abs_sum / double(s.n)));
    worst = std::max(worst, std::abs(it->second.mape - s.pct_sum / double(s.n)));
  }
  for (const auto& [k, r] : rep)
    if (!keys.count(k)) ++mismatched;

  // Overall MAE is the frame-weighted mean of the per-class MAEs.
  double partition = 0;
  for (const std::string f : {"F1", "F2", "F3", "overall"}) {
    const auto all = rep.find("overall/all/" + f);
    if (all == rep.end()) {
      ++mismatched;
      continue;
    }
    double num = 0;
    long den = 0;
    for (const auto& [k, r] : rep)
      if (k.rfind("class/", 0) == 0 && k.size() > f.size() &&
          k.compare(k.size() - f.size() - 1, std::string::npos, "/" + f) == 0) {
        num += r.mae * double(r.frames);
        den += r.frames;
      }
    if (den != all->second.frames) ++mismatched;
    partition = std::max(partition, std::abs(num / double(den) - all->second.mae));
  }
  return {mismatched == 0 && worst <= 1e-9 && partition <= 1e-9,
          std::to_string(rep.size()) + " rows, max diff " + fmt("%.1e", worst) +
              ", partition " + fmt("%.1e", partition) + ", mismatched " +
              std::to_string(mismatched)};
}

Errc error_code(const std::string& bytes) {
  try {
    deserialize(bytes, "probe");
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::generic;
}

Outcome c10_serialization() {
  const fs::path dir = g_work / "serial";
  fs::create_directories(dir);
  ModelWeights w = build(ModelConfig{}, 12);
  w.blocks[4].bn.running_var.setConstant(1.75);
  save(w, dir / "a.bin");
  save(load(dir / "a.bin"), dir / "b.bin");
  const std::string a = slurp(dir / "a.bin");
  const bool same = !a.empty() && a == slurp(dir / "b.bin");

  std::string magic = a, ver = a;
  magic[1] ^= 0x20;
  ver[8] = char(ver[8] + 3);
  const Errc e1 = error_code(magic), e2 = error_code(ver),
             e3 = error_code(a.substr(0, a.size() / 2));
  const bool distinct = e1 == Errc::bad_magic && e2 == Errc::version_mismatch &&
                        e3 == Errc::truncated;
  return {same && distinct, std::string(same ? "round trip identical" : "round trip differs") +
                                ", " + (distinct ? "3 distinct errors" : "wrong error codes") +
                                " (" + std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (arg == "--reuse") {
      g_reuse = true;
    } else {
      const int n = std::atoi(arg.c_str());
      if (n < 1 || n > 10) {
        std::fprintf(stderr, "usage: %s [--work DIR] [--reuse] [1..10 ...]\n", argv[0]);
        return 2;
      }
      selected.insert(n);
    }
  }
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 = none beyond the criterion's own check
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all{
      {1, "gradient check", 60, c1_gradcheck},
      {2, "receptive field", 10, c2_receptive},
      {3, "masking", 0, c3_masking},
      {4, "dsp oracles", 0, c4_dsp},
      {5, "baseline tracker", 30, c5_baseline},
      {6, "overfit", 300, c6_overfit},
      {7, "end to end", 0, c7_end_to_end},
      {8, "determinism", 0, c8_determinism},
      {9, "metric engine", 0, c9_metrics},
      {10, "serialization", 0, c10_serialization},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && s >= c.limit_s) {
      o.pass = false;
      o.detail += ", over the " + fmt("%.0f", c.limit_s) + " s limit";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %-17s %s  %8.1f s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                s, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
