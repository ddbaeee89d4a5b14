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

#include "ftrack/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>
#include <random>

#include "ftrack/io.hpp"

namespace ftrack {

ResonatorCoeffs resonator_coeffs(double freq_hz, double bandwidth_hz,
                                 double sample_rate) {
  if (!(freq_hz > 0.0 && freq_hz < sample_rate / 2) || !(bandwidth_hz > 0.0))
    throw Error(Errc::bad_argument,
                "resonator: need 0 < F < fs/2 and B > 0 (F=" +
                    std::to_string(freq_hz) + ", B=" + std::to_string(bandwidth_hz) +
                    ")",
                ErrorKind::usage);
  const double T = 1.0 / sample_rate;
  const double r = std::exp(-std::numbers::pi * bandwidth_hz * T);
  ResonatorCoeffs c;
  c.b1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq_hz * T);
  c.b2 = -r * r;
  c.a = 1.0 - c.b1 - c.b2;
  return c;
}

VectorX<double> resonator(std::span<const double> x, double freq_hz,
                          double bandwidth_hz, double sample_rate) {
  const ResonatorCoeffs c = resonator_coeffs(freq_hz, bandwidth_hz, sample_rate);
  VectorX<double> y(static_cast<Index>(x.size()));
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = c.a * x[n] + c.b1 * y1 + c.b2 * y2;
    y(static_cast<Index>(n)) = v;
    y2 = y1;
    y1 = v;
  }
  return y;
}

namespace {

double interpolate(double a, double b, double u, Interp interp) {
  u = std::clamp(u, 0.0, 1.0);
  const double s =
      interp == Interp::linear ? u : 0.5 * (1.0 - std::cos(std::numbers::pi * u));
  return a + (b - a) * s;
}

double draw(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace

double TrajectorySpec::formant_at(int k, double u) const {
  return interpolate(formants[k].start_hz, formants[k].end_hz, u, interp);
}

double TrajectorySpec::f0_at(double u) const {
  return interpolate(f0_start_hz, f0_end_hz, u, interp);
}

void TrajectorySpec::validate(double sample_rate) const {
  auto fail = [](const std::string& m) {
    throw Error(Errc::bad_argument, "trajectory: " + m, ErrorKind::usage);
  };
  if (!(duration_s > 0)) fail("duration must be > 0");
  if (!(pad_s >= 0)) fail("pad must be >= 0");
  if (!(noise_mix >= 0 && noise_mix < 1)) fail("noise_mix must lie in [0, 1)");
  if (!(source_tilt >= 0 && source_tilt < 1)) fail("source_tilt must lie in [0, 1)");
  if (!(f0_start_hz > 0 && f0_end_hz > 0)) fail("f0 must be > 0");
  if (!(fricative_s >= 0 && fricative_s < duration_s))
    fail("fricative segment must be shorter than the voiced span");
  for (const auto& f : formants)
    if (!(f.bandwidth_hz > 0)) fail("bandwidths must be > 0");
  const double top = sample_rate / 2 - kNyquistMargin;
  constexpr int kGrid = 200;
  for (int i = 0; i <= kGrid; ++i) {
    const double u = double(i) / kGrid;
    const double f1 = formant_at(0, u), f2 = formant_at(1, u), f3 = formant_at(2, u);
    if (!(0 < f1 && f1 < f2 && f2 < f3 && f3 < top))
      fail("need 0 < F1 < F2 < F3 < fs/2 - margin along the trajectory");
  }
}

SynthUtterance synthesize(const TrajectorySpec& spec, int sample_rate) {
  const double fs = sample_rate;
  spec.validate(fs);
  const Index pad = std::lround(spec.pad_s * fs);
  const Index voiced = std::lround(spec.duration_s * fs);
  const Index total = voiced + 2 * pad;
  const double fric_start = 0.5 * (spec.duration_s - spec.fricative_s);
  const double fric_end = fric_start + spec.fricative_s;

  std::mt19937_64 rng(spec.seed);
  std::vector<double> samples(static_cast<std::size_t>(total), 0.0);
  std::array<double, 3> y1{}, y2{};
  double phase = 1.0;  // first pulse on the first voiced sample
  double tilted = 0.0;
  for (Index n = 0; n < total; ++n) {
    double src = 0.0;
    const double u = double(n - pad) / double(voiced);
    if (n >= pad && n < pad + voiced) {
      const double f0 = spec.f0_at(u);
      const double noise = (2.0 * uniform01(rng) - 1.0) * std::sqrt(3.0 * f0 / fs);
      const double t = double(n - pad) / fs;
      if (spec.fricative_s > 0 && t >= fric_start && t < fric_end) {
        src = noise;
      } else {
        double pulse = 0.0;
        if (phase >= 1.0) {
          pulse = 1.0;
          phase -= 1.0;
        }
        phase += f0 / fs;
        src = (1.0 - spec.noise_mix) * pulse + spec.noise_mix * noise;
      }
    }
    tilted = src + spec.source_tilt * tilted;
    double x = tilted;
    for (int k = 0; k < 3; ++k) {
      const ResonatorCoeffs c = resonator_coeffs(
          spec.formant_at(k, u), spec.formants[k].bandwidth_hz, fs);
      const double v = c.a * x + c.b1 * y1[k] + c.b2 * y2[k];
      y2[k] = y1[k];
      y1[k] = v;
      x = v;
    }
    samples[static_cast<std::size_t>(n)] = x;
  }
  double peak = 0.0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  if (peak > 0)
    for (double& s : samples) s *= 0.5 / peak;

  SynthUtterance out;
  out.audio.samples = std::move(samples);
  out.audio.sample_rate = sample_rate;
  const Index hop = sample_rate / 100;
  const Index frames = total / hop;
  out.labels.frames.resize(static_cast<std::size_t>(frames));
  for (Index k = 0; k < frames; ++k) {
    FormantFrame& f = out.labels.frames[static_cast<std::size_t>(k)];
    f.time_s = (double(k) + 0.5) * 0.01;
    const double t = f.time_s - double(pad) / fs;
    const double u = t / (double(voiced) / fs);
    for (int j = 0; j < 3; ++j) f.hz[j] = spec.formant_at(j, u);
    f.is_speech = u >= 0.0 && u < 1.0;
    if (!f.is_speech)
      f.phone = "sil";
    else if (spec.fricative_s > 0 && t >= fric_start && t < fric_end)
      f.phone = "s";
    else
      f.phone = "V";
  }
  return out;
}

TrajectorySpec random_spec(std::uint64_t seed, const CorpusRanges& r) {
  std::mt19937_64 rng(seed);
  TrajectorySpec s;
  bool ok = false;
  for (int attempt = 0; attempt < 100000 && !ok; ++attempt) {
    s.formants[0].start_hz = draw(rng, r.f1_lo, r.f1_hi);
    s.formants[0].end_hz = draw(rng, r.f1_lo, r.f1_hi);
    s.formants[1].start_hz = draw(rng, r.f2_lo, r.f2_hi);
    s.formants[1].end_hz = draw(rng, r.f2_lo, r.f2_hi);
    s.formants[2].start_hz = draw(rng, r.f3_lo, r.f3_hi);
    s.formants[2].end_hz = draw(rng, r.f3_lo, r.f3_hi);
    ok = true;
    for (int k = 0; k < 2; ++k) {
      ok = ok &&
           s.formants[k + 1].start_hz - s.formants[k].start_hz >= r.min_spacing_hz &&
           s.formants[k + 1].end_hz - s.formants[k].end_hz >= r.min_spacing_hz;
    }
  }
  if (!ok)
    throw Error(Errc::bad_argument, "corpus ranges admit no ordered formants",
                ErrorKind::usage);
  s.interp = uniform01(rng) < 0.5 ? Interp::linear : Interp::sinusoidal;
  s.f0_start_hz = draw(rng, r.f0_lo, r.f0_hi);
  s.f0_end_hz = draw(rng, r.f0_lo, r.f0_hi);
  // Label frames = (duration + 2 pad) / 10 ms must stay within max_frames.
  const double longest = std::min(r.duration_hi_s, 0.01 * double(r.max_frames) - 2 * s.pad_s);
  s.duration_s = std::round(draw(rng, r.duration_lo_s, longest) * 100.0) / 100.0;
  for (int k = 0; k < 3; ++k)
    s.formants[k].bandwidth_hz = draw(rng, r.bandwidth_lo[k], r.bandwidth_hi[k]);
  s.noise_mix = r.noise_mix;
  if (uniform01(rng) < r.fricative_fraction)
    s.fricative_s = draw(rng, r.fricative_lo_s, r.fricative_hi_s);
  s.seed = mix_seed(seed, 0x5EED);
  return s;
}

std::uint64_t utterance_seed(std::uint64_t corpus_seed, int split, Index index) {
  return mix_seed(mix_seed(corpus_seed, 0xC0 + std::uint64_t(split)),
                  static_cast<std::uint64_t>(index));
}

void make_corpus(const CorpusCounts& counts, std::uint64_t seed,
                 const std::filesystem::path& out_dir, const CorpusRanges& ranges) {
  if (counts.train < 1 || counts.val < 1 || counts.test < 1)
    throw Error(Errc::bad_argument, "corpus: every split needs at least one utterance",
                ErrorKind::usage);
  const std::array<std::pair<const char*, Index>, 3> splits{
      {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}}};
  std::error_code ec;
  for (int s = 0; s < 3; ++s) {
    const auto [name, count] = splits[s];
    const auto dir = out_dir / name;
    std::filesystem::create_directories(dir, ec);
    if (ec)
      throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<ManifestEntry> entries;
    for (Index i = 0; i < count; ++i) {
      const TrajectorySpec spec = random_spec(utterance_seed(seed, s, i), ranges);
      const SynthUtterance utt = synthesize(spec);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "utt%04lld", static_cast<long long>(i));
      const std::filesystem::path rel_wav = std::filesystem::path(name) / (std::string(stem) + ".wav");
      const std::filesystem::path rel_csv = std::filesystem::path(name) / (std::string(stem) + ".csv");
      write_wav(out_dir / rel_wav, utt.audio);
      write_label_csv(out_dir / rel_csv, utt.labels);
      entries.push_back({rel_wav, rel_csv});
    }
    write_manifest(out_dir / (std::string(name) + ".txt"), entries);
  }
}

}  // namespace ftrack
