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

// File formats: PCM16 WAV, cached feature matrices, normalization
// statistics, track/label CSVs and utterance manifests.

#ifndef FTRACK_IO_HPP
#define FTRACK_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "ftrack/dsp.hpp"
#include "ftrack/track.hpp"

namespace ftrack {

namespace fs = std::filesystem;

/// Reads a mono 16-bit PCM WAV file. Non-16 kHz audio is rejected unless
/// `allow_any_rate` is set.
AudioClip read_wav(const fs::path& path, bool allow_any_rate = false);
/// Writes mono 16-bit PCM; samples are clipped to [-1, 1).
void write_wav(const fs::path& path, const AudioClip& clip);

// Feature cache: 8-byte magic "FTRKFEAT", u32 version, u32 column count,
// u64 frame count T, T x cols float32 row-major, T mask bytes. All
// little-endian.
void write_feature_file(const fs::path& path, const FeatureMatrix& features);
FeatureMatrix read_feature_file(const fs::path& path);

void write_norm_stats(const fs::path& path, const NormStats& stats);
NormStats read_norm_stats(const fs::path& path);

/// `frame_index,time_s,f1_hz,f2_hz,f3_hz`
void write_track_csv(const fs::path& path, const FormantTrack& track);
/// Reads the first five columns of a track or label CSV.
FormantTrack read_track_csv(const fs::path& path);

/// `frame_index,time_s,f1_hz,f2_hz,f3_hz,phone_label,is_speech`
void write_label_csv(const fs::path& path, const FormantTrack& track);
FormantTrack read_label_csv(const fs::path& path);
/// True when the first data row carries phone_label and is_speech columns.
bool has_label_columns(const fs::path& path);

struct ManifestEntry {
  fs::path audio;
  fs::path labels;
};

/// One `audio_path, labels_path` per line; relative paths resolve against
/// the manifest's directory. Blank lines and '#' comments are skipped.
std::vector<ManifestEntry> read_manifest(const fs::path& path);
void write_manifest(const fs::path& path,
                    const std::vector<ManifestEntry>& entries);

/// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file_bytes(const fs::path& path);

}  // namespace ftrack

#endif  // FTRACK_IO_HPP
