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

#include "ftrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ftrack {

namespace {

constexpr const char* kFormantNames[3] = {"F1", "F2", "F3"};

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

/// Running sums for one report row.
struct Accumulator {
  double abs_err = 0.0;
  double pct_err = 0.0;
  Index frames = 0;

  void add(double pred, double ref) {
    const double e = std::abs(pred - ref);
    abs_err += e;
    pct_err += 100.0 * e / ref;
    ++frames;
  }
};

}  // namespace

const char* class_name(PhoneClass c) {
  switch (c) {
    case PhoneClass::vowel: return "vowel";
    case PhoneClass::semivowel: return "semivowel";
    case PhoneClass::nasal: return "nasal";
    case PhoneClass::fricative: return "fricative";
    case PhoneClass::affricate: return "affricate";
    case PhoneClass::stop: return "stop";
    case PhoneClass::other: return "other";
  }
  return "other";
}

std::optional<PhoneClass> parse_class(const std::string& name) {
  for (PhoneClass c : kSpeechClasses)
    if (name == class_name(c)) return c;
  if (name == "other" || name == "silence" || name == "other/silence")
    return PhoneClass::other;
  return std::nullopt;
}

PhoneClassMap PhoneClassMap::timit_default() {
  PhoneClassMap m;
  for (const char* p : {"iy", "ih", "eh", "ey", "ae", "aa", "aw", "ay", "ah",
                        "ao", "oy", "ow", "uh", "uw", "ux", "er", "ax", "ix",
                        "axr", "ax-h", "V"})
    m.set(p, PhoneClass::vowel);
  for (const char* p : {"l", "r", "w", "y", "hh", "hv", "el"})
    m.set(p, PhoneClass::semivowel);
  for (const char* p : {"m", "n", "ng", "em", "en", "eng", "nx"})
    m.set(p, PhoneClass::nasal);
  for (const char* p : {"s", "sh", "z", "zh", "f", "th", "v", "dh"})
    m.set(p, PhoneClass::fricative);
  for (const char* p : {"jh", "ch"}) m.set(p, PhoneClass::affricate);
  for (const char* p : {"b", "d", "g", "p", "t", "k", "dx", "q", "bcl", "dcl",
                        "gcl", "pcl", "tcl", "kcl"})
    m.set(p, PhoneClass::stop);
  for (const char* p : {"pau", "epi", "h#", "sil"})
    m.set(p, PhoneClass::other);
  return m;
}

PhoneClassMap PhoneClassMap::parse(const std::string& text) {
  PhoneClassMap m;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') continue;
    std::stringstream ls(line);
    std::string label, cls;
    if (!(ls >> label)) continue;
    if (!(ls >> cls))
      throw Error(Errc::generic, "class map line " + std::to_string(lineno) +
                                     ": expected 'label class'");
    const auto c = parse_class(cls);
    if (!c)
      throw Error(Errc::generic, "class map line " + std::to_string(lineno) +
                                     ": unknown class '" + cls + "'");
    m.set(label, *c);
  }
  return m;
}

PhoneClassMap PhoneClassMap::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<PhoneClass> PhoneClassMap::find(const std::string& label) const {
  const auto it = map_.find(label);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::string PhoneClassMap::to_text() const {
  std::string out;
  for (const auto& [label, c] : map_) out += label + " " + class_name(c) + "\n";
  return out;
}

FormantTrack align_labels_30ms(const FormantTrack& track) {
  FormantTrack out = track;
  const std::size_t n = track.frames.size();
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t == 0 ? 0 : t - 1;
    const std::size_t hi = std::min(n - 1, t + 1);
    const std::size_t idx[3] = {lo, t, hi};
    for (int k = 0; k < 3; ++k) {
      if (!track.frames[t].defined(k)) {
        out.frames[t].hz[k] = 0.0;
        continue;
      }
      double sum = 0.0;
      int count = 0;
      for (std::size_t s : idx)
        if (track.frames[s].defined(k)) {
          sum += track.frames[s].hz[k];
          ++count;
        }
      out.frames[t].hz[k] = sum / count;
    }
  }
  return out;
}

std::optional<double> mae(std::span<const double> pred, std::span<const double> ref,
                          const std::vector<bool>& selector) {
  if (pred.size() != ref.size() || ref.size() != selector.size())
    throw Error(Errc::shape_mismatch, "mae: length mismatch");
  Accumulator acc;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (selector[i] && ref[i] > 0.0) acc.add(pred[i], ref[i]);
  if (acc.frames == 0) return std::nullopt;
  return acc.abs_err / double(acc.frames);
}

std::optional<double> mape(std::span<const double> pred,
                           std::span<const double> ref,
                           const std::vector<bool>& selector) {
  if (pred.size() != ref.size() || ref.size() != selector.size())
    throw Error(Errc::shape_mismatch, "mape: length mismatch");
  Accumulator acc;
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (selector[i] && ref[i] > 0.0) acc.add(pred[i], ref[i]);
  if (acc.frames == 0) return std::nullopt;
  return acc.pct_err / double(acc.frames);
}

std::vector<PhoneClass> classify_frames(const FormantTrack& track,
                                        const PhoneClassMap& map) {
  std::vector<PhoneClass> out(track.frames.size(), PhoneClass::other);
  std::set<std::string> missing;
  for (std::size_t t = 0; t < track.frames.size(); ++t) {
    const auto& f = track.frames[t];
    const auto c = map.find(f.phone);
    if (!c) {
      missing.insert(f.phone);
      continue;
    }
    out[t] = f.is_speech ? *c : PhoneClass::other;
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : " ") + m;
    throw Error(Errc::generic, "unmapped phone labels: " + list);
  }
  return out;
}

TransitionSelection transition_regions(const std::vector<PhoneClass>& classes,
                                       Index window_frames) {
  const Index n = static_cast<Index>(classes.size());
  TransitionSelection sel{std::vector<bool>(n, false), std::vector<bool>(n, false)};
  const Index half = std::max<Index>(window_frames, 1);
  for (Index b = 0; b + 1 < n; ++b) {
    const PhoneClass left = classes[b], right = classes[b + 1];
    std::vector<bool>* target = nullptr;
    if (is_consonant(left) && right == PhoneClass::vowel) target = &sel.cv;
    if (left == PhoneClass::vowel && is_consonant(right)) target = &sel.vc;
    if (!target) continue;
    for (Index t = std::max<Index>(0, b + 1 - half);
         t <= std::min<Index>(n - 1, b + half); ++t)
      if (classes[t] != PhoneClass::other) (*target)[t] = true;
  }
  return sel;
}

const EvalRow* EvalReport::find(const std::string& scope, const std::string& region,
                                const std::string& formant) const {
  for (const auto& r : rows)
    if (r.scope == scope && r.region == region && r.formant == formant) return &r;
  return nullptr;
}

std::string EvalReport::to_csv() const {
  std::string out = "scope,region,formant,mae_hz,mape_pct,frames\n";
  for (const auto& r : rows)
    out += r.scope + "," + r.region + "," + r.formant + "," + fmt(r.mae_hz, 12) +
           "," + fmt(r.mape_pct, 12) + "," + std::to_string(r.frames) + "\n";
  return out;
}

std::string EvalReport::to_table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-11s %-10s %-8s %10s %9s %8s\n", "scope",
                "region", "formant", "MAE(Hz)", "MAPE(%)", "frames");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-11s %-10s %-8s %10.2f %9.2f %8lld\n",
                  r.scope.c_str(), r.region.c_str(), r.formant.c_str(), r.mae_hz,
                  r.mape_pct, static_cast<long long>(r.frames));
    out += buf;
  }
  return out;
}

TrackPair pair_by_time(const FormantTrack& pred, const FormantTrack& ref) {
  TrackPair out;
  if (ref.frames.empty() || pred.frames.empty()) return out;
  const double t0 = ref.frames.front().time_s;
  const double dt = ref.frames.size() > 1 ? ref.frames[1].time_s - t0 : 0.01;
  if (!(dt > 0)) throw Error(Errc::generic, "reference times are not increasing");
  for (const auto& p : pred.frames) {
    const double pos = (p.time_s - t0) / dt;
    const long long k = std::llround(pos);
    if (k < 0 || k >= static_cast<long long>(ref.frames.size())) continue;
    if (std::abs(ref.frames[k].time_s - p.time_s) >= 0.5 * dt) continue;
    out.pred.frames.push_back(p);
    out.ref.frames.push_back(ref.frames[k]);
  }
  return out;
}

TrackPair reference_pair(const FormantTrack& pred, const FormantTrack& labels,
                         bool pred_is_label_track) {
  const FormantTrack ref = align_labels_30ms(labels);
  return pair_by_time(pred_is_label_track ? align_labels_30ms(pred) : pred, ref);
}

EvalReport evaluate(std::span<const TrackPair> pairs, const PhoneClassMap& map,
                    const EvalConfig& config) {
  // Region index: 0 = overall, 1..6 = classes, 7 = CV, 8 = VC.
  constexpr int kRegions = 9;
  std::array<std::array<Accumulator, 3>, kRegions> acc{};

  for (const auto& pair : pairs) {
    if (pair.pred.frames.size() != pair.ref.frames.size())
      throw Error(Errc::shape_mismatch, "evaluate: prediction has " +
                                            std::to_string(pair.pred.size()) +
                                            " frames, reference " +
                                            std::to_string(pair.ref.size()));
    const auto classes = classify_frames(pair.ref, map);
    const auto trans = transition_regions(classes, config.transition_window);
    for (std::size_t t = 0; t < classes.size(); ++t) {
      if (classes[t] == PhoneClass::other) continue;
      const auto& ref = pair.ref.frames[t];
      const auto& pred = pair.pred.frames[t];
      const int cls = 1 + static_cast<int>(classes[t]);
      for (int k = 0; k < 3; ++k) {
        if (!ref.defined(k)) continue;
        acc[0][k].add(pred.hz[k], ref.hz[k]);
        acc[cls][k].add(pred.hz[k], ref.hz[k]);
        if (trans.cv[t]) acc[7][k].add(pred.hz[k], ref.hz[k]);
        if (trans.vc[t]) acc[8][k].add(pred.hz[k], ref.hz[k]);
      }
    }
  }

  EvalReport report;
  auto emit = [&](int region, const std::string& scope, const std::string& name) {
    Accumulator pooled;
    for (int k = 0; k < 3; ++k) {
      const Accumulator& a = acc[region][k];
      if (a.frames > 0)
        report.rows.push_back({scope, name, kFormantNames[k],
                               a.abs_err / double(a.frames),
                               a.pct_err / double(a.frames), a.frames});
      pooled.abs_err += a.abs_err;
      pooled.pct_err += a.pct_err;
      pooled.frames += a.frames;
    }
    if (pooled.frames > 0)
      report.rows.push_back({scope, name, "overall",
                             pooled.abs_err / double(pooled.frames),
                             pooled.pct_err / double(pooled.frames), pooled.frames});
  };
  emit(0, "overall", "all");
  for (PhoneClass c : kSpeechClasses)
    emit(1 + static_cast<int>(c), "class", class_name(c));
  emit(7, "transition", "CV");
  emit(8, "transition", "VC");
  return report;
}

EvalReport evaluate(const FormantTrack& pred, const FormantTrack& ref,
                    const PhoneClassMap& map, const EvalConfig& config) {
  const TrackPair pair{pred, ref};
  return evaluate(std::span<const TrackPair>(&pair, 1), map, config);
}

std::string plot_data_csv(const TrackPair& pair) {
  std::string out =
      "frame,time_s,ref_f1,pred_f1,ref_f2,pred_f2,ref_f3,pred_f3,phone,is_speech\n";
  for (std::size_t t = 0; t < pair.ref.frames.size(); ++t) {
    const auto& r = pair.ref.frames[t];
    const auto& p = pair.pred.frames[t];
    out += std::to_string(t) + "," + fmt(r.time_s, 4);
    for (int k = 0; k < 3; ++k) out += "," + fmt(r.hz[k], 3) + "," + fmt(p.hz[k], 3);
    out += "," + r.phone + "," + (r.is_speech ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace ftrack
