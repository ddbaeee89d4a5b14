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

#include "ftrack/dataset.hpp"

#include <cmath>

#include "ftrack/eval.hpp"
#include "ftrack/io.hpp"

namespace ftrack {

void attach_labels(Utterance& utt, const FormantTrack& labels,
                   const FrameSpec& frame, int sample_rate) {
  const Index T = utt.frames();
  utt.targets_hz = MatrixX<double>::Zero(T, 3);
  utt.is_speech = ArrayXb::Constant(T, false);
  if (labels.frames.empty()) return;
  if (labels.frames.size() < 3)
    throw Error(Errc::short_signal,
                utt.id + ": label track needs at least 3 frames");
  const FormantTrack ref = align_labels_30ms(labels);
  const double t0 = ref.frames.front().time_s;
  const double dt = ref.frames[1].time_s - t0;
  if (!(dt > 0))
    throw Error(Errc::generic, utt.id + ": label times are not increasing");
  const auto n = static_cast<long long>(ref.frames.size());
  for (Index t = 0; t < T; ++t) {
    const double c = frame.frame_center_s(t, sample_rate);
    const long long k = std::llround((c - t0) / dt);
    if (k < 0 || k >= n) continue;
    const FormantFrame& f = ref.frames[k];
    if (std::abs(f.time_s - c) >= 0.5 * dt) continue;
    for (int j = 0; j < 3; ++j) utt.targets_hz(t, j) = f.hz[j];
    utt.is_speech(t) = f.is_speech;
  }
}

Utterance make_utterance(std::string id, const AudioClip& clip,
                         const FormantTrack& labels,
                         const ExtractOptions& options) {
  Utterance utt;
  utt.id = std::move(id);
  utt.features = extract_features(clip, options);
  attach_labels(utt, labels, options.frame, clip.sample_rate);
  return utt;
}

std::vector<Utterance> load_dataset(const std::filesystem::path& manifest,
                                    const LoadOptions& options) {
  std::vector<Utterance> out;
  for (const auto& entry : read_manifest(manifest)) {
    const AudioClip clip = read_wav(entry.audio, options.allow_any_rate);
    const FormantTrack labels = read_label_csv(entry.labels);
    out.push_back(make_utterance(entry.audio.stem().string(), clip, labels,
                                 options.extract));
  }
  if (out.empty())
    throw Error(Errc::generic, "manifest " + manifest.string() + " is empty");
  return out;
}

NormStats fit_norm(std::span<const Utterance> utterances) {
  std::vector<FeatureMatrix> feats;
  feats.reserve(utterances.size());
  for (const auto& u : utterances) feats.push_back(u.features);
  return fit_norm(std::span<const FeatureMatrix>(feats));
}

void apply_norm(std::vector<Utterance>& utterances, const NormStats& stats) {
  for (auto& u : utterances) u.features = apply_norm(u.features, stats);
}

FormantTrack to_track(const MatrixX<double>& hz, const FrameSpec& frame,
                      int sample_rate) {
  FormantTrack track;
  track.frames.resize(hz.rows());
  for (Index t = 0; t < hz.rows(); ++t) {
    auto& f = track.frames[t];
    f.time_s = frame.frame_center_s(t, sample_rate);
    for (int k = 0; k < 3; ++k) f.hz[k] = hz(t, k);
    f.is_speech = true;
    f.phone = "";
  }
  return track;
}

}  // namespace ftrack
