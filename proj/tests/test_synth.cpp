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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ftrack/io.hpp"
#include "ftrack/synth.hpp"
#include "oracles.hpp"

using namespace ftrack;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ftrack_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string tree_bytes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files)
    out += std::filesystem::relative(f, root).string() + "\n" + read_file_bytes(f);
  return out;
}

}  // namespace

TEST_CASE("resonator coefficients and response") {
  const ResonatorCoeffs c = resonator_coeffs(500.0, 60.0, 16000.0);
  CHECK(c.pole_radius() == doctest::Approx(0.98828).epsilon(1e-5));
  CHECK(c.a == doctest::Approx(1.0 - c.b1 - c.b2));
  CHECK(resonator_coeffs(500.0, 8000.0, 16000.0).pole_radius() ==
        doctest::Approx(std::exp(-M_PI * 0.5)).epsilon(1e-12));
  CHECK(resonator_coeffs(500.0, 8000.0, 16000.0).pole_radius() < 0.21);

  std::vector<double> impulse(4096, 0.0);
  impulse[0] = 1.0;
  const VectorX<double> h = resonator(impulse, 500.0, 60.0);
  const std::vector<double> hv(h.data(), h.data() + h.size());
  const Index bin = oracle::dft_peak_bin(hv, 4096);
  CHECK(std::abs(double(bin) * 16000.0 / 4096.0 - 500.0) <= 16000.0 / 4096.0);

  const VectorX<double> wide = resonator(impulse, 500.0, 8000.0);
  CHECK(wide.tail(4096 - 20).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(resonator_coeffs(0.0, 60.0, 16000.0), Error);
  CHECK_THROWS_AS(resonator_coeffs(8000.0, 60.0, 16000.0), Error);
  CHECK_THROWS_AS(resonator_coeffs(500.0, 0.0, 16000.0), Error);
}

TEST_CASE("synthesize: framing arithmetic and steady labels") {
  const TrajectorySpec spec;
  const SynthUtterance u = synthesize(spec);
  CHECK(u.audio.samples.size() == 17600);
  CHECK(u.audio.sample_rate == 16000);
  REQUIRE(u.labels.frames.size() == 110);
  Index speech = 0;
  for (std::size_t k = 0; k < 110; ++k) {
    const auto& f = u.labels.frames[k];
    CHECK(f.hz[0] == 500.0);
    CHECK(f.hz[1] == 1500.0);
    CHECK(f.hz[2] == 2500.0);
    CHECK(f.is_speech == (k >= 5 && k < 105));
    CHECK(f.phone == (f.is_speech ? "V" : "sil"));
    speech += f.is_speech;
  }
  CHECK(speech == 100);
  for (std::size_t n = 0; n < 800; ++n) CHECK(u.audio.samples[n] == 0.0);
  double peak = 0;
  for (double s : u.audio.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == doctest::Approx(0.5));

  const SynthUtterance again = synthesize(spec);
  CHECK(again.audio.samples == u.audio.samples);
}

TEST_CASE("synthesize: trajectories and fricative segment") {
  TrajectorySpec spec;
  spec.formants[0] = {300.0, 700.0, 60.0};
  spec.formants[1] = {2200.0, 1100.0, 90.0};
  spec.interp = Interp::sinusoidal;
  spec.fricative_s = 0.1;
  const SynthUtterance u = synthesize(spec);
  Index fric = 0;
  for (const auto& f : u.labels.frames) {
    CHECK(f.hz[0] < f.hz[1]);
    CHECK(f.hz[1] < f.hz[2]);
    fric += f.phone == "s";
  }
  CHECK(fric == 10);
  CHECK(u.labels.frames.front().hz[0] == doctest::Approx(300.0));
  CHECK(spec.formant_at(0, 0.5) == doctest::Approx(500.0));
  CHECK(spec.formant_at(0, 0.25) == doctest::Approx(300.0 + 400.0 * 0.5 * (1 - std::cos(M_PI * 0.25))));

  TrajectorySpec crossing;
  crossing.formants[1] = {1500.0, 400.0, 90.0};
  CHECK_THROWS_AS(synthesize(crossing), Error);
  TrajectorySpec high;
  high.formants[2] = {7800.0, 7800.0, 120.0};
  CHECK_THROWS_AS(synthesize(high), Error);
}

TEST_CASE("random specs respect the documented ranges") {
  const CorpusRanges r;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const TrajectorySpec spec = random_spec(s, r);
    for (double u : {0.0, 0.3, 0.7, 1.0}) {
      const double f1 = spec.formant_at(0, u), f2 = spec.formant_at(1, u),
                   f3 = spec.formant_at(2, u);
      CHECK((f1 >= 250.0 && f1 <= 900.0));
      CHECK((f2 >= 800.0 && f2 <= 2500.0));
      CHECK((f3 >= 1800.0 && f3 <= 3200.0));
      CHECK(f2 - f1 >= 200.0 - 1e-9);
      CHECK(f3 - f2 >= 200.0 - 1e-9);
    }
    CHECK((spec.f0_start_hz >= 80.0 && spec.f0_start_hz <= 250.0));
    CHECK((spec.duration_s >= 0.5 && spec.duration_s <= 3.0));
    CHECK((spec.duration_s + 2 * spec.pad_s) * 100.0 <= 710.0);
  }
  CHECK(utterance_seed(1, 0, 0) != utterance_seed(1, 1, 0));
  CHECK(utterance_seed(1, 0, 0) != utterance_seed(1, 0, 1));
}

TEST_CASE("corpus generation is deterministic and well formed") {
  const auto a = fresh_dir("corpus_a"), b = fresh_dir("corpus_b");
  const CorpusCounts counts{3, 2, 2};
  make_corpus(counts, 9, a);
  make_corpus(counts, 9, b);
  CHECK(tree_bytes(a) == tree_bytes(b));

  const auto entries = read_manifest(a / "train.txt");
  REQUIRE(entries.size() == 3);
  for (const char* split : {"train", "val", "test"})
    for (const auto& e : read_manifest(a / (std::string(split) + ".txt"))) {
      const AudioClip clip = read_wav(e.audio);
      const FormantTrack labels = read_label_csv(e.labels);
      CHECK(labels.frames.size() <= 710);
      CHECK(labels.frames.size() == clip.samples.size() / 160);
      for (const auto& f : labels.frames) {
        CHECK(f.hz[0] < f.hz[1]);
        CHECK(f.hz[1] < f.hz[2]);
      }
    }

  const auto c = fresh_dir("corpus_c");
  make_corpus(counts, 10, c);
  CHECK(tree_bytes(a) != tree_bytes(c));
}
