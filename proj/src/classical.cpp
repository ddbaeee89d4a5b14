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

#include "ftrack/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ftrack {

namespace {

Complex horner(std::span<const Complex> coeffs, Complex z) {
  Complex acc = coeffs[0];
  for (std::size_t i = 1; i < coeffs.size(); ++i) acc = acc * z + coeffs[i];
  return acc;
}

double max_residual(std::span<const Complex> coeffs,
                    const std::vector<Complex>& roots, double scale) {
  double worst = 0.0;
  for (const Complex& r : roots)
    worst = std::max(worst, std::abs(horner(coeffs, r)) / scale);
  return worst;
}

constexpr double kRealRootTol = 1e-7;

}  // namespace

std::vector<Complex> poly_roots(std::span<const Complex> coeffs, double tol,
                                int max_iter) {
  if (coeffs.size() < 2)
    throw Error(Errc::bad_argument, "poly_roots: degree must be >= 1",
                ErrorKind::usage);
  if (coeffs[0] == Complex(0.0))
    throw Error(Errc::bad_argument, "poly_roots: leading coefficient is zero",
                ErrorKind::usage);

  const std::size_t n = coeffs.size() - 1;
  double scale = 0.0;
  for (const Complex& c : coeffs) scale = std::max(scale, std::abs(c));

  std::vector<Complex> monic(coeffs.begin(), coeffs.end());
  for (Complex& c : monic) c /= coeffs[0];

  // Start on a circle enclosing the roots, rotated off the real axis so no
  // two starting points are conjugate-symmetric.
  double radius = 1.0;
  for (std::size_t k = 1; k <= n; ++k)
    radius = std::max(radius, std::pow(std::abs(monic[k]), 1.0 / double(k)));
  std::vector<Complex> z(n);
  constexpr double kOffset = 0.4 * std::numbers::sqrt2;
  for (std::size_t k = 0; k < n; ++k)
    z[k] = std::polar(radius, 2.0 * std::numbers::pi * double(k) / double(n) +
                                  kOffset);

  std::vector<Complex> best = z;
  double best_residual = max_residual(coeffs, z, scale);
  for (int iter = 0; iter < max_iter; ++iter) {
    double max_step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Complex denom(1.0);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) denom *= (z[i] - z[j]);
      if (denom == Complex(0.0)) denom = Complex(1e-300);
      const Complex step = horner(monic, z[i]) / denom;
      z[i] -= step;
      max_step = std::max(max_step, std::abs(step) / std::max(1.0, std::abs(z[i])));
    }
    const double residual = max_residual(coeffs, z, scale);
    if (residual < best_residual || !std::isfinite(best_residual)) {
      best_residual = residual;
      best = z;
    }
    if (residual < tol && max_step < 1e-13) break;
  }
  if (!(best_residual < tol)) throw RootsNotConverged(best, best_residual);
  return best;
}

std::vector<Complex> poly_roots(std::span<const double> coeffs, double tol,
                                int max_iter) {
  std::vector<Complex> c(coeffs.begin(), coeffs.end());
  return poly_roots(std::span<const Complex>(c), tol, max_iter);
}

std::vector<FormantCandidate> roots_to_candidates(std::span<const Complex> roots,
                                                  double sample_rate) {
  std::vector<FormantCandidate> out;
  for (const Complex& r : roots) {
    // Real roots come back with imaginary parts at rounding level.
    if (!(r.imag() > kRealRootTol * std::abs(r))) continue;
    out.push_back({sample_rate / (2.0 * std::numbers::pi) * std::arg(r),
                   -sample_rate / std::numbers::pi * std::log(std::abs(r))});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
  return out;
}

std::vector<FormantCandidate> frame_candidates(
    const Eigen::Ref<const VectorX<double>>& frame, Index lpc_order,
    double sample_rate) {
  const VectorX<double> r = autocorr(frame, lpc_order);
  if (!(r(0) > kEnergyFloor)) return {};
  const auto fit = levinson(r, lpc_order);
  // z^p A(z) = z^p + a_1 z^(p-1) + ... + a_p; its roots are the poles.
  std::vector<double> poly(lpc_order + 1);
  poly[0] = 1.0;
  for (Index k = 0; k < lpc_order; ++k) poly[k + 1] = fit.a(k);
  return roots_to_candidates(poly_roots(std::span<const double>(poly)),
                             sample_rate);
}

FormantTrack track_baseline(const AudioClip& clip, const BaselineConfig& config) {
  Eigen::Map<const VectorX<double>> raw(clip.samples.data(),
                                        Index(clip.samples.size()));
  const VectorX<double> emphasized = preemphasize(
      raw, config.analysis.preemphasis, config.analysis.remove_dc);
  const AudioClip filtered{
      std::vector<double>(emphasized.data(),
                          emphasized.data() + emphasized.size()),
      clip.sample_rate};
  const MatrixX<double> frames = frame_and_window(filtered, config.analysis.frame);
  const double fs = clip.sample_rate;

  FormantTrack track;
  track.frames.resize(frames.rows());
  for (Index t = 0; t < frames.rows(); ++t) {
    FormantFrame& out = track.frames[t];
    out.time_s = config.analysis.frame.frame_center_s(t, clip.sample_rate);
    out.phone = "";
    out.is_speech = true;
    std::vector<FormantCandidate> cands;
    try {
      cands = frame_candidates(frames.row(t).transpose(), config.lpc_order, fs);
    } catch (const RootsNotConverged&) {
      cands.clear();  // leave the frame undefined
    }
    int slot = 0;
    for (const auto& c : cands) {
      if (slot == 3) break;
      if (c.bandwidth < config.max_bandwidth_hz &&
          c.frequency > config.min_frequency_hz &&
          c.frequency < fs / 2.0 - config.nyquist_margin_hz)
        out.hz[slot++] = c.frequency;
    }
  }

  if (config.median && track.frames.size() >= 3) {
    const FormantTrack raw_track = track;
    for (std::size_t t = 1; t + 1 < track.frames.size(); ++t) {
      for (int k = 0; k < 3; ++k) {
        if (!raw_track.frames[t].defined(k)) continue;
        std::vector<double> v;
        for (std::size_t s = t - 1; s <= t + 1; ++s)
          if (raw_track.frames[s].defined(k)) v.push_back(raw_track.frames[s].hz[k]);
        std::sort(v.begin(), v.end());
        track.frames[t].hz[k] = v.size() == 2 ? 0.5 * (v[0] + v[1]) : v[v.size() / 2];
      }
      // Keep defined slots ordered.
      auto& hz = track.frames[t].hz;
      if (hz[0] > 0 && hz[1] > 0 && hz[2] > 0) std::sort(hz.begin(), hz.end());
    }
  }
  return track;
}

}  // namespace ftrack
