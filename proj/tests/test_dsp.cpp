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

#include "doctest.h"
#include "ftrack/dsp.hpp"
#include "oracles.hpp"

using namespace ftrack;

TEST_CASE("preemphasize follows the difference equation") {
  Eigen::VectorXd x(3);
  x << 1, 1, 1;
  const VectorX<double> y = preemphasize(x, 0.97, false);
  CHECK(y(0) == doctest::Approx(1.0));
  CHECK(y(1) == doctest::Approx(0.03));
  CHECK(y(2) == doctest::Approx(0.03));

  CHECK(preemphasize(Eigen::VectorXd::Zero(10)).isZero(0.0));

  auto g = oracle::rng(1);
  const Eigen::VectorXd r = oracle::random_vector(1000, g);
  const VectorX<double> p = preemphasize(r);
  const double mean = r.mean();
  double worst = std::abs(p(0) - (r(0) - mean));
  for (Index n = 1; n < r.size(); ++n)
    worst = std::max(worst, std::abs(p(n) - ((r(n) - mean) - 0.97 * (r(n - 1) - mean))));
  CHECK(worst < 1e-12);
}

TEST_CASE("preemphasize is linear without DC removal") {
  auto g = oracle::rng(2);
  const Eigen::VectorXd a = oracle::random_vector(500, g), b = oracle::random_vector(500, g);
  const double al = 0.7, be = -1.3;
  const VectorX<double> lhs = preemphasize(Eigen::VectorXd(al * a + be * b), 0.97, false);
  const VectorX<double> rhs =
      al * preemphasize(a, 0.97, false) + be * preemphasize(b, 0.97, false);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("preemphasize rejects empty input") {
  try {
    preemphasize(Eigen::VectorXd());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_signal);
    CHECK(std::string(e.what()) == "empty signal");
  }
}

TEST_CASE("framing arithmetic and window") {
  AudioClip clip;
  clip.samples.assign(16000, 1.0);
  const FrameSpec spec;
  CHECK(spec.window_samples(16000) == 480);
  CHECK(spec.hop_samples(16000) == 160);
  const MatrixX<double> frames = frame_and_window(clip, spec);
  CHECK(frames.rows() == 98);
  CHECK(frames.cols() == 480);
  const VectorX<double> w = hamming(480);
  CHECK(w(0) == doctest::Approx(0.08));
  CHECK(w(479) == doctest::Approx(0.08));
  CHECK((frames.row(5).transpose() - w).cwiseAbs().maxCoeff() == 0.0);

  AudioClip short_clip;
  short_clip.samples.assign(100, 0.0);
  CHECK_THROWS_AS(frame_and_window(short_clip, spec), Error);
}

TEST_CASE("frame spec validation") {
  FrameSpec bad;
  bad.hop_ms = 40.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.hop_ms = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("autocorr matches a double loop") {
  Eigen::VectorXd imp = Eigen::VectorXd::Zero(32);
  imp(0) = 1.0;
  const VectorX<double> r = autocorr(imp, 8);
  CHECK(r(0) == 1.0);
  CHECK(r.tail(8).isZero(0.0));
  CHECK(autocorr(Eigen::VectorXd::Zero(32), 5).isZero(0.0));

  auto g = oracle::rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = oracle::random_vector(480, g);
    const VectorX<double> a = autocorr(x, 17);
    const Eigen::VectorXd b = oracle::autocorr(x, 17);
    CHECK(((a - b).cwiseAbs().array() / b.cwiseAbs().array().max(1e-300)).maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(autocorr(Eigen::VectorXd::Ones(4), 4), Error);
}

TEST_CASE("levinson closed forms") {
  Eigen::VectorXd r(2);
  r << 1.0, 0.5;
  const auto fit = levinson(r, 1);
  CHECK(fit.a(0) == doctest::Approx(-0.5));
  CHECK(fit.gain == doctest::Approx(0.75));
  CHECK_FALSE(fit.clamped);

  Eigen::VectorXd white = Eigen::VectorXd::Zero(5);
  white(0) = 1.0;
  const auto w = levinson(white, 4);
  CHECK(w.a.isZero(0.0));
  CHECK(w.gain == 1.0);
}

TEST_CASE("levinson rejects degenerate frames and clamps") {
  try {
    levinson(Eigen::VectorXd::Zero(4), 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_frame);
    CHECK(std::string(e.what()) == "degenerate frame");
  }
  Eigen::VectorXd r(2);
  r << 1.0, 1.0;  // perfectly predictable: |k| = 1
  const auto fit = levinson(r, 1);
  CHECK(fit.clamped);
  CHECK(std::abs(fit.a(0)) == doctest::Approx(kReflectionClamp));
}

TEST_CASE("levinson equals the dense Toeplitz solve") {
  auto g = oracle::rng(4);
  double worst = 0.0;
  for (Index p = 1; p <= 17; ++p)
    for (int trial = 0; trial < 6; ++trial) {
      const Eigen::VectorXd x = oracle::random_vector(480, g);
      const Eigen::VectorXd r = oracle::autocorr(x, p);
      const Eigen::VectorXd ref = oracle::toeplitz_lpc(r, p);
      const auto fit = levinson(r, p);
      worst = std::max(worst, (fit.a - ref).norm() / ref.norm());
    }
  CHECK(worst < 1e-10);
}

TEST_CASE("levinson on an AR(8) autocorrelation") {
  auto g = oracle::rng(5);
  const Eigen::VectorXd a = oracle::random_stable_lpc(8, g);
  // Drive the all-pole filter with noise and take the sample autocorrelation.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(200000);
  for (Index n = 0; n < x.size(); ++n) {
    double v = oracle::uniform(g);
    for (Index k = 0; k < 8 && k < n; ++k) v -= a(k) * x(n - 1 - k);
    x(n) = v;
  }
  const Eigen::VectorXd r = oracle::autocorr(x, 8);
  const auto fit = levinson(r, 8);
  const Eigen::VectorXd ref = oracle::toeplitz_lpc(r, 8);
  CHECK((fit.a - ref).norm() / ref.norm() < 1e-10);
  CHECK((fit.a - a).norm() / a.norm() < 0.05);
}

TEST_CASE("lpc_to_cepstrum closed form and zero input") {
  Eigen::VectorXd a(1);
  a << -0.5;
  const VectorX<double> c = lpc_to_cepstrum(a, 3);
  CHECK(c(0) == doctest::Approx(0.5));
  CHECK(c(1) == doctest::Approx(0.125));
  CHECK(c(2) == doctest::Approx(0.5 * 0.5 * 0.5 / 3.0));
  CHECK(lpc_to_cepstrum(Eigen::VectorXd::Zero(6), 30).isZero(0.0));
}

TEST_CASE("lpc_to_cepstrum matches the spectral log cepstrum") {
  auto g = oracle::rng(6);
  double worst = 0.0;
  for (Index p = 1; p <= 17; ++p) {
    const Eigen::VectorXd a = oracle::random_stable_lpc(p, g);
    const VectorX<double> c = lpc_to_cepstrum(a, 30);
    const Eigen::VectorXd ref = oracle::spectral_cepstrum(a, 30);
    worst = std::max(worst, (c - ref).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("lpcc stack layout") {
  auto g = oracle::rng(7);
  Eigen::VectorXd frame = oracle::random_vector(480, g).cwiseProduct(hamming(480));
  const LpccStack s = extract_lpcc_stack(frame);
  CHECK(s.values.size() == 300);
  CHECK(s.valid);
  for (Index p = kMinLpccOrder; p <= kMaxLpccOrder; ++p) {
    const auto fit = levinson(autocorr(frame, p), p);
    const VectorX<double> c = lpc_to_cepstrum(fit.a, 30);
    CHECK((s.values.segment((p - kMinLpccOrder) * 30, 30) - c).cwiseAbs().maxCoeff() == 0.0);
  }
  const LpccStack again = extract_lpcc_stack(frame);
  CHECK((again.values.array() == s.values.array()).all());

  const LpccStack silent = extract_lpcc_stack(Eigen::VectorXd::Zero(480));
  CHECK_FALSE(silent.valid);
  CHECK(silent.values.isZero(0.0));
}

TEST_CASE("lpcc stack on a single resonance matches the order-8 pipeline") {
  // Impulse response of one resonance at 700 Hz.
  const double r = 0.97, th = 2.0 * std::numbers::pi * 700.0 / 16000.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(480);
  for (Index n = 0; n < 480; ++n) {
    const double prev1 = n >= 1 ? x(n - 1) : 0.0, prev2 = n >= 2 ? x(n - 2) : 0.0;
    x(n) = (n == 0 ? 1.0 : 0.0) + 2 * r * std::cos(th) * prev1 - r * r * prev2;
  }
  const Eigen::VectorXd frame = x.cwiseProduct(hamming(480));
  const LpccStack s = extract_lpcc_stack(frame);
  const Eigen::VectorXd rr = oracle::autocorr(frame, 8);
  const Eigen::VectorXd a = oracle::toeplitz_lpc(rr, 8);
  const VectorX<double> c = lpc_to_cepstrum(a, 30);
  CHECK((s.values.head(30) - c).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cepstral surrogate") {
  CHECK(pscc_fft_length(480) == 512);
  const VectorX<double> z = extract_pscc_surrogate(Eigen::VectorXd::Zero(480));
  CHECK(z.size() == 50);
  CHECK(z.cwiseAbs().maxCoeff() < 1e-12);

  auto g = oracle::rng(8);
  const Eigen::VectorXd frame = oracle::random_vector(480, g).cwiseProduct(hamming(480));
  const VectorX<double> c = extract_pscc_surrogate(frame);
  const Eigen::VectorXd ref = oracle::real_cepstrum(frame, 50, 512);
  CHECK((c - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("feature extraction shape, finiteness and silence masking") {
  AudioClip clip;
  auto g = oracle::rng(9);
  clip.samples.assign(8000, 0.0);
  for (std::size_t n = 3200; n < clip.samples.size(); ++n)
    clip.samples[n] = 0.3 * oracle::uniform(g);
  ExtractOptions opt;
  opt.remove_dc = false;
  const FeatureMatrix f = extract_features(clip, opt);
  CHECK(f.frames() == 48);
  CHECK(f.values.cols() == kFeatureDim);
  CHECK(f.values.allFinite());
  CHECK_FALSE(f.mask(0));
  CHECK(f.values.row(0).isZero(0.0));
  CHECK(f.mask(47));
}

TEST_CASE("normalization statistics") {
  FeatureMatrix c;
  c.values = MatrixX<double>::Constant(20, 4, 5.0);
  c.mask = ArrayXb::Constant(20, true);
  const NormStats s = fit_norm(std::span<const FeatureMatrix>(&c, 1));
  CHECK(s.mean(0) == doctest::Approx(5.0));
  CHECK(s.std(0) == kNormStdFloor);
  CHECK(apply_norm(c, s).values.cwiseAbs().maxCoeff() == 0.0);

  auto g = oracle::rng(10);
  std::vector<FeatureMatrix> set(3);
  for (auto& f : set) {
    f.values = oracle::random_matrix(50, 6, g) * 3.0;
    f.values.col(2).array() += 7.0;
    f.mask = ArrayXb::Constant(50, true);
    f.mask.segment(45, 5).setConstant(false);
    f.values.bottomRows(5).setConstant(1e6);  // invalid frames must not count
  }
  const NormStats st = fit_norm(std::span<const FeatureMatrix>(set));
  // Two-pass moments over valid rows of the normalized data.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6), sq = Eigen::VectorXd::Zero(6);
  Index n = 0;
  std::vector<FeatureMatrix> normed;
  for (const auto& f : set) normed.push_back(apply_norm(f, st));
  for (const auto& f : normed)
    for (Index t = 0; t < 45; ++t) {
      sum += f.values.row(t).transpose();
      ++n;
    }
  const Eigen::VectorXd mean = sum / double(n);
  for (const auto& f : normed)
    for (Index t = 0; t < 45; ++t)
      sq += (f.values.row(t).transpose() - mean).array().square().matrix();
  const Eigen::VectorXd sd = (sq / double(n)).cwiseSqrt();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sd.array() - 1.0).abs().maxCoeff() < 1e-6);
  CHECK(normed[0].values.bottomRows(5).isZero(0.0));

  FeatureMatrix standard;
  standard.values = oracle::random_matrix(20000, 3, g) * std::sqrt(3.0);
  standard.mask = ArrayXb::Constant(20000, true);
  const NormStats id = fit_norm(std::span<const FeatureMatrix>(&standard, 1));
  CHECK(id.mean.cwiseAbs().maxCoeff() < 0.05);
  CHECK((id.std.array() - 1.0).abs().maxCoeff() < 0.05);
}
