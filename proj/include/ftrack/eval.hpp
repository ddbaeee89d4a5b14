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

// Formant tracking error metrics: MAE / MAPE over speech frames, broken
// down by broad phone class and by CV / VC transition regions.

#ifndef FTRACK_EVAL_HPP
#define FTRACK_EVAL_HPP

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftrack/track.hpp"
#include "ftrack/common.hpp"

namespace ftrack {

enum class PhoneClass { vowel, semivowel, nasal, fricative, affricate, stop, other };

inline constexpr std::array<PhoneClass, 6> kSpeechClasses{
    PhoneClass::vowel,     PhoneClass::semivowel, PhoneClass::nasal,
    PhoneClass::fricative, PhoneClass::affricate, PhoneClass::stop};

const char* class_name(PhoneClass c);
std::optional<PhoneClass> parse_class(const std::string& name);
inline bool is_consonant(PhoneClass c) {
  return c != PhoneClass::vowel && c != PhoneClass::other;
}

class PhoneClassMap {
 public:
  /// TIMIT groupings plus the synthetic corpus labels ("V", "s", "sil").
  static PhoneClassMap timit_default();
  /// `label class` per line; lines starting with '#' are comments.
  static PhoneClassMap parse(const std::string& text);
  static PhoneClassMap from_file(const std::filesystem::path& path);

  void set(const std::string& label, PhoneClass c) { map_[label] = c; }
  std::optional<PhoneClass> find(const std::string& label) const;
  std::string to_text() const;

 private:
  std::map<std::string, PhoneClass> map_;
};

/// 30 ms references on the 10 ms grid: frame t averages frames t-1, t, t+1
/// (indices clamped). Undefined (0 Hz) neighbours are skipped; the label and
/// speech flag are the centre frame's.
FormantTrack align_labels_30ms(const FormantTrack& track);

/// Mean |pred - ref| over selected frames with ref > 0; empty -> nullopt.
std::optional<double> mae(std::span<const double> pred, std::span<const double> ref,
                          const std::vector<bool>& selector);
/// 100 * mean |pred - ref| / ref over the same frames as mae().
std::optional<double> mape(std::span<const double> pred,
                           std::span<const double> ref,
                           const std::vector<bool>& selector);

/// Per-frame broad class; non-speech frames are `other`. Throws listing
/// every label missing from the map.
std::vector<PhoneClass> classify_frames(const FormantTrack& track,
                                        const PhoneClassMap& map);

struct TransitionSelection {
  std::vector<bool> cv;  // consonant -> vowel
  std::vector<bool> vc;  // vowel -> consonant
};

/// Frames within `window_frames` of each CV / VC boundary, on both sides,
/// counting the frame adjacent to the boundary as the first (a window of 0
/// still keeps the two adjacent frames). Only speech frames are selected.
TransitionSelection transition_regions(const std::vector<PhoneClass>& classes,
                                       Index window_frames = 3);

struct EvalRow {
  std::string scope;    // overall | class | transition
  std::string region;   // all | <class> | CV | VC
  std::string formant;  // F1 | F2 | F3 | overall
  double mae_hz = 0.0;
  double mape_pct = 0.0;
  Index frames = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(const std::string& scope, const std::string& region,
                      const std::string& formant) const;
  /// `scope,region,formant,mae_hz,mape_pct,frames`
  std::string to_csv() const;
  std::string to_table() const;
};

struct EvalConfig {
  Index transition_window = 3;
};

/// Prediction and reference on a common frame grid.
struct TrackPair {
  FormantTrack pred;
  FormantTrack ref;
};

/// Matches prediction frames to reference frames by nearest time (within
/// half a reference hop); unmatched reference frames are dropped.
TrackPair pair_by_time(const FormantTrack& pred, const FormantTrack& ref);

/// Reference = align_labels_30ms(labels), paired to `pred` by time. A
/// prediction that is itself a label track (10 ms annotation) receives the
/// same averaging first, so identical files compare as equal.
TrackPair reference_pair(const FormantTrack& pred, const FormantTrack& labels,
                         bool pred_is_label_track = false);

/// Metrics pooled over every utterance in `pairs`; transitions are found
/// per utterance.
EvalReport evaluate(std::span<const TrackPair> pairs, const PhoneClassMap& map,
                    const EvalConfig& config = {});
EvalReport evaluate(const FormantTrack& pred, const FormantTrack& ref,
                    const PhoneClassMap& map, const EvalConfig& config = {});

/// `frame,time_s,ref_f1,pred_f1,ref_f2,pred_f2,ref_f3,pred_f3,phone,is_speech`
std::string plot_data_csv(const TrackPair& pair);

}  // namespace ftrack

#endif  // FTRACK_EVAL_HPP
