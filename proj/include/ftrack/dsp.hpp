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

// Acoustic front end: pre-emphasis, Hamming framing, LPC analysis, LPC
// cepstra and a real-cepstrum complement, plus feature normalization.
//
// Every frame yields a 350-dim vector: ten LPC cepstra of 30 coefficients
// each (LPC orders 8..17, ascending) followed by 50 real-cepstrum
// coefficients.

#ifndef FTRACK_DSP_HPP
#define FTRACK_DSP_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ftrack/common.hpp"

namespace ftrack {

inline constexpr Index kMinLpccOrder = 8;
inline constexpr Index kMaxLpccOrder = 17;
inline constexpr Index kCepsPerOrder = 30;
inline constexpr Index kLpccDim =
    (kMaxLpccOrder - kMinLpccOrder + 1) * kCepsPerOrder;  // 300
inline constexpr Index kPsccDim = 50;
inline constexpr Index kFeatureDim = kLpccDim + kPsccDim;  // 350

/// Frames whose zero-lag autocorrelation falls below this are silent.
inline constexpr double kEnergyFloor = 1e-12;
inline constexpr double kReflectionClamp = 0.999999;
inline constexpr double kNormStdFloor = 1e-8;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
};

enum class WindowKind { hamming };

struct FrameSpec {
  double window_ms = 30.0;
  double hop_ms = 10.0;
  WindowKind window_kind = WindowKind::hamming;

  Index window_samples(int sample_rate) const {
    return static_cast<Index>(std::lround(window_ms * sample_rate / 1000.0));
  }
  Index hop_samples(int sample_rate) const {
    return static_cast<Index>(std::lround(hop_ms * sample_rate / 1000.0));
  }
  /// Number of whole frames in a signal of `n` samples (0 if too short).
  Index num_frames(Index n, int sample_rate) const {
    const Index win = window_samples(sample_rate);
    if (n < win) return 0;
    return (n - win) / hop_samples(sample_rate) + 1;
  }
  /// Time of the centre of frame t, in seconds.
  double frame_center_s(Index t, int sample_rate) const {
    return (static_cast<double>(t * hop_samples(sample_rate)) +
            0.5 * static_cast<double>(window_samples(sample_rate))) /
           sample_rate;
  }
  void validate() const;
};

struct FeatureMatrix {
  MatrixX<double> values;  // T x kFeatureDim
  ArrayXb mask;            // true = valid frame

  Index frames() const { return values.rows(); }
};

struct NormStats {
  VectorX<double> mean;
  VectorX<double> std;
};

// ---------------------------------------------------------------------------
// Primitives. These are templates over Eigen expressions so that float and
// double pipelines share one implementation.

/// y[0] = x[0], y[n] = x[n] - coef * x[n-1], after optional mean removal.
template <typename Derived>
VectorX<typename Derived::Scalar> preemphasize(
    const Eigen::MatrixBase<Derived>& x,
    typename Derived::Scalar coef = typename Derived::Scalar(0.97),
    bool remove_dc = true) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw Error(Errc::empty_signal, "empty signal");
  VectorX<Scalar> centred = x;
  if (remove_dc) centred.array() -= centred.mean();
  VectorX<Scalar> y(centred.size());
  y(0) = centred(0);
  y.tail(y.size() - 1) =
      centred.tail(y.size() - 1) - coef * centred.head(y.size() - 1);
  return y;
}

/// Symmetric Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1)).
VectorX<double> hamming(Index n);

/// Biased, unnormalized autocorrelation r[0..max_lag].
template <typename Derived>
VectorX<typename Derived::Scalar> autocorr(const Eigen::MatrixBase<Derived>& x,
                                           Index max_lag) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.size();
  if (max_lag < 0 || max_lag >= n)
    throw Error(Errc::bad_argument, "autocorr: max_lag must be < frame length",
                ErrorKind::usage);
  VectorX<Scalar> r(max_lag + 1);
  for (Index k = 0; k <= max_lag; ++k)
    r(k) = x.segment(k, n - k).dot(x.segment(0, n - k));
  return r;
}

template <typename Scalar>
struct LpcFit {
  VectorX<Scalar> a;  // A(z) = 1 + sum_k a_k z^-k
  Scalar gain = 0;    // final prediction error energy
  bool clamped = false;
};

/// Levinson-Durbin solve of the order-p normal equations. Reflection
/// coefficients reaching the unit circle are clamped to keep A(z)
/// minimum phase; `clamped` reports it.
template <typename Derived>
LpcFit<typename Derived::Scalar> levinson(const Eigen::MatrixBase<Derived>& r,
                                          Index order) {
  using Scalar = typename Derived::Scalar;
  if (order < 1 || r.size() < order + 1)
    throw Error(Errc::bad_argument, "levinson: need r[0..order]",
                ErrorKind::usage);
  if (!(r(0) > Scalar(0)))
    throw Error(Errc::degenerate_frame, "degenerate frame");

  LpcFit<Scalar> fit;
  fit.a = VectorX<Scalar>::Zero(order);
  VectorX<Scalar> prev(order);
  Scalar err = r(0);
  for (Index i = 0; i < order; ++i) {
    Scalar acc = r(i + 1);
    for (Index j = 0; j < i; ++j) acc += fit.a(j) * r(i - j);
    Scalar k = -acc / err;
    const Scalar lim = Scalar(kReflectionClamp);
    if (!(std::abs(k) < Scalar(1))) {
      k = k > 0 ? lim : -lim;
      fit.clamped = true;
    }
    prev.head(i) = fit.a.head(i);
    for (Index j = 0; j < i; ++j) fit.a(j) = prev(j) + k * prev(i - 1 - j);
    fit.a(i) = k;
    err *= (Scalar(1) - k * k);
  }
  fit.gain = err;
  return fit;
}

/// Cepstrum c_1..c_n of 1/A(z) by the standard recursion.
template <typename Derived>
VectorX<typename Derived::Scalar> lpc_to_cepstrum(
    const Eigen::MatrixBase<Derived>& a, Index n_ceps) {
  using Scalar = typename Derived::Scalar;
  const Index p = a.size();
  VectorX<Scalar> c = VectorX<Scalar>::Zero(n_ceps);
  for (Index n = 1; n <= n_ceps; ++n) {
    Scalar acc = 0;
    for (Index k = std::max<Index>(1, n - p); k < n; ++k)
      acc += Scalar(k) * c(k - 1) * a(n - k - 1);
    c(n - 1) = -acc / Scalar(n);
    if (n <= p) c(n - 1) -= a(n - 1);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Frame-level and clip-level extraction.

/// T x N_win matrix of Hamming-windowed frames.
MatrixX<double> frame_and_window(const AudioClip& clip, const FrameSpec& spec);

struct LpccStack {
  VectorX<double> values;  // kLpccDim
  bool valid = true;
};

/// LPC cepstra for orders 8..17 of one windowed frame. Silent frames give a
/// zero vector with valid == false.
LpccStack extract_lpcc_stack(const Eigen::Ref<const VectorX<double>>& frame);

/// FFT length used by the real-cepstrum features for an n-sample frame.
Index pscc_fft_length(Index frame_length);

/// Real cepstrum c_1..c_50: inverse DFT of log(|DFT(frame)| + 1e-10).
VectorX<double> extract_pscc_surrogate(
    const Eigen::Ref<const VectorX<double>>& frame);

struct ExtractOptions {
  FrameSpec frame;
  double preemphasis = 0.97;
  bool remove_dc = true;
};

FeatureMatrix extract_features(const AudioClip& clip,
                               const ExtractOptions& options = {});

NormStats fit_norm(std::span<const FeatureMatrix> features);
FeatureMatrix apply_norm(const FeatureMatrix& features, const NormStats& stats);

}  // namespace ftrack

#endif  // FTRACK_DSP_HPP
