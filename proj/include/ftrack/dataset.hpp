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

// Utterances paired with frame-aligned formant targets, loaded from a
// manifest of `audio, labels` entries.

#ifndef FTRACK_DATASET_HPP
#define FTRACK_DATASET_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ftrack/dsp.hpp"
#include "ftrack/track.hpp"

namespace ftrack {

struct Utterance {
  std::string id;
  FeatureMatrix features;
  MatrixX<double> targets_hz;  // T x 3, 0 = undefined
  ArrayXb is_speech;           // T

  Index frames() const { return features.frames(); }
};

/// Targets for each feature frame from the 30 ms-averaged 10 ms labels,
/// matched by frame-centre time. Frames beyond the label grid are
/// non-speech with undefined targets.
void attach_labels(Utterance& utt, const FormantTrack& labels,
                   const FrameSpec& frame, int sample_rate);

Utterance make_utterance(std::string id, const AudioClip& clip,
                         const FormantTrack& labels,
                         const ExtractOptions& options = {});

struct LoadOptions {
  ExtractOptions extract;
  bool allow_any_rate = false;
};

/// Reads every manifest entry and extracts raw (unnormalized) features.
std::vector<Utterance> load_dataset(const std::filesystem::path& manifest,
                                    const LoadOptions& options = {});

NormStats fit_norm(std::span<const Utterance> utterances);
void apply_norm(std::vector<Utterance>& utterances, const NormStats& stats);

/// Frame-level values back to a track on the feature-frame grid.
FormantTrack to_track(const MatrixX<double>& hz, const FrameSpec& frame,
                      int sample_rate);

}  // namespace ftrack

#endif  // FTRACK_DATASET_HPP
