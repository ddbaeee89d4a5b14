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

// LPC root-finding formant tracker.

#ifndef FTRACK_CLASSICAL_HPP
#define FTRACK_CLASSICAL_HPP

#include <complex>
#include <span>
#include <vector>

#include "ftrack/dsp.hpp"
#include "ftrack/track.hpp"

namespace ftrack {

using Complex = std::complex<double>;

struct FormantCandidate {
  double frequency = 0.0;  // Hz
  double bandwidth = 0.0;  // Hz
};

/// Thrown when Durand-Kerner fails to reach the residual tolerance.
class RootsNotConverged : public Error {
 public:
  RootsNotConverged(std::vector<Complex> best, double residual)
      : Error(Errc::not_converged,
              "poly_roots: no convergence (residual " +
                  std::to_string(residual) + ")",
              ErrorKind::numerical),
        best_(std::move(best)),
        residual_(residual) {}

  const std::vector<Complex>& best_iterate() const { return best_; }
  double residual() const { return residual_; }

 private:
  std::vector<Complex> best_;
  double residual_;
};

/// All roots of sum_i coeffs[i] z^(n-i) (highest degree first) by
/// Durand-Kerner simultaneous iteration. On return every root satisfies
/// |P(r)| / max|coeff| < tol.
std::vector<Complex> poly_roots(std::span<const Complex> coeffs,
                                double tol = 1e-8, int max_iter = 500);
std::vector<Complex> poly_roots(std::span<const double> coeffs,
                                double tol = 1e-8, int max_iter = 500);

/// Upper-half-plane poles mapped to (frequency, bandwidth), ascending.
std::vector<FormantCandidate> roots_to_candidates(std::span<const Complex> roots,
                                                  double sample_rate);

struct BaselineConfig {
  ExtractOptions analysis;
  Index lpc_order = 12;
  double max_bandwidth_hz = 400.0;
  double min_frequency_hz = 90.0;
  double nyquist_margin_hz = 50.0;
  bool median = false;  // 3-frame median per formant slot
};

/// Per-frame LPC root picking. Frames without three admissible candidates
/// report 0 Hz in the missing slots.
FormantTrack track_baseline(const AudioClip& clip,
                            const BaselineConfig& config = {});

/// Candidates of one pre-emphasized, windowed frame.
std::vector<FormantCandidate> frame_candidates(
    const Eigen::Ref<const VectorX<double>>& frame, Index lpc_order,
    double sample_rate);

}  // namespace ftrack

#endif  // FTRACK_CLASSICAL_HPP
