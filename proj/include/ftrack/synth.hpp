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

// Cascade formant synthesis with exactly known formant trajectories, and
// the seeded train / val / test corpus built from it.

#ifndef FTRACK_SYNTH_HPP
#define FTRACK_SYNTH_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "ftrack/dsp.hpp"
#include "ftrack/track.hpp"

namespace ftrack {

/// Second-order resonator coefficients:
/// y[n] = a*x[n] + b1*y[n-1] + b2*y[n-2], a = 1 - b1 - b2.
struct ResonatorCoeffs {
  double a = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;

  double pole_radius() const { return std::sqrt(-b2); }
};

ResonatorCoeffs resonator_coeffs(double freq_hz, double bandwidth_hz,
                                 double sample_rate);

/// Fixed-parameter resonator over a whole sequence.
VectorX<double> resonator(std::span<const double> x, double freq_hz,
                          double bandwidth_hz, double sample_rate = 16000.0);

enum class Interp { linear, sinusoidal };

struct FormantTrajectory {
  double start_hz = 500.0;
  double end_hz = 500.0;
  double bandwidth_hz = 80.0;
};

struct TrajectorySpec {
  std::array<FormantTrajectory, 3> formants{
      FormantTrajectory{500.0, 500.0, 60.0}, FormantTrajectory{1500.0, 1500.0, 90.0},
      FormantTrajectory{2500.0, 2500.0, 120.0}};
  Interp interp = Interp::linear;
  double f0_start_hz = 120.0;
  double f0_end_hz = 120.0;
  double duration_s = 1.0;  // voiced span, excluding the pads
  double pad_s = 0.05;      // silence before and after
  double noise_mix = 0.05;
  /// Pole of the one-pole lowpass on the excitation (glottal spectral
  /// tilt); 0 leaves the source flat.
  double source_tilt = 0.8;
  /// When > 0, a noise-excited "s" segment of this length sits in the
  /// middle of the voiced span.
  double fricative_s = 0.0;
  std::uint64_t seed = 0;

  /// Formant k (0-based) at normalized position u in [0, 1].
  double formant_at(int k, double u) const;
  double f0_at(double u) const;
  /// Throws (usage) on ordering, range or bandwidth violations.
  void validate(double sample_rate = 16000.0) const;
};

/// Frequency margin kept below Nyquist by every formant.
inline constexpr double kNyquistMargin = 500.0;

struct SynthUtterance {
  AudioClip audio;
  FormantTrack labels;  // 10 ms grid, frame k centred at (k + 0.5) * 10 ms
};

SynthUtterance synthesize(const TrajectorySpec& spec, int sample_rate = 16000);

struct CorpusRanges {
  double f1_lo = 250.0, f1_hi = 900.0;
  double f2_lo = 800.0, f2_hi = 2500.0;
  double f3_lo = 1800.0, f3_hi = 3200.0;
  double min_spacing_hz = 200.0;
  double f0_lo = 80.0, f0_hi = 250.0;
  double duration_lo_s = 0.5, duration_hi_s = 3.0;
  std::array<double, 3> bandwidth_lo{50.0, 70.0, 100.0};
  std::array<double, 3> bandwidth_hi{100.0, 140.0, 200.0};
  double noise_mix = 0.05;
  /// Share of utterances carrying a fricative segment.
  double fricative_fraction = 0.25;
  double fricative_lo_s = 0.06, fricative_hi_s = 0.12;
  Index max_frames = 710;
};

/// Random spec for utterance `index` of a split; deterministic in `seed`.
TrajectorySpec random_spec(std::uint64_t seed, const CorpusRanges& ranges = {});

struct CorpusCounts {
  Index train = 200;
  Index val = 20;
  Index test = 40;
};

/// Writes <out>/{train,val,test}/uttNNNN.{wav,csv} and the manifests
/// <out>/{train,val,test}.txt. Every split draws from its own seed stream.
void make_corpus(const CorpusCounts& counts, std::uint64_t seed,
                 const std::filesystem::path& out_dir,
                 const CorpusRanges& ranges = {});

/// Seed of utterance `index` in split `split` (0 train, 1 val, 2 test).
std::uint64_t utterance_seed(std::uint64_t corpus_seed, int split, Index index);

}  // namespace ftrack

#endif  // FTRACK_SYNTH_HPP
