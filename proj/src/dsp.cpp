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

#include "ftrack/dsp.hpp"

#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace ftrack {

void FrameSpec::validate() const {
  if (!(hop_ms > 0.0) || !(window_ms >= hop_ms))
    throw Error(Errc::bad_argument,
                "frame spec requires window_ms >= hop_ms > 0",
                ErrorKind::usage);
}

VectorX<double> hamming(Index n) {
  VectorX<double> w(n);
  if (n == 1) {
    w(0) = 1.0;
    return w;
  }
  for (Index i = 0; i < n; ++i)
    w(i) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  return w;
}

MatrixX<double> frame_and_window(const AudioClip& clip, const FrameSpec& spec) {
  spec.validate();
  if (clip.sample_rate <= 0)
    throw Error(Errc::bad_argument, "sample rate must be positive");
  const Index win = spec.window_samples(clip.sample_rate);
  const Index hop = spec.hop_samples(clip.sample_rate);
  const Index n = static_cast<Index>(clip.samples.size());
  const Index frames = spec.num_frames(n, clip.sample_rate);
  if (frames == 0)
    throw Error(Errc::short_signal, "signal shorter than one analysis window (" +
                                        std::to_string(n) + " < " +
                                        std::to_string(win) + " samples)");

  Eigen::Map<const VectorX<double>> x(clip.samples.data(), n);
  const RowVectorX<double> w = hamming(win).transpose();
  MatrixX<double> out(frames, win);
  for (Index t = 0; t < frames; ++t)
    out.row(t) = x.segment(t * hop, win).transpose().cwiseProduct(w);
  return out;
}

LpccStack extract_lpcc_stack(const Eigen::Ref<const VectorX<double>>& frame) {
  LpccStack out;
  out.values = VectorX<double>::Zero(kLpccDim);
  // Autocorrelation prefixes are shared by every order.
  const VectorX<double> r = autocorr(frame, kMaxLpccOrder);
  if (!(r(0) > kEnergyFloor)) {
    out.valid = false;
    return out;
  }
  for (Index p = kMinLpccOrder; p <= kMaxLpccOrder; ++p) {
    const auto fit = levinson(r.head(p + 1), p);
    out.values.segment((p - kMinLpccOrder) * kCepsPerOrder, kCepsPerOrder) =
        lpc_to_cepstrum(fit.a, kCepsPerOrder);
  }
  return out;
}

Index pscc_fft_length(Index frame_length) {
  Index n = 1;
  while (n < frame_length) n <<= 1;
  return std::max<Index>(n, 2 * kPsccDim + 2);
}

VectorX<double> extract_pscc_surrogate(
    const Eigen::Ref<const VectorX<double>>& frame) {
  const Index nfft = pscc_fft_length(frame.size());
  std::vector<double> padded(nfft, 0.0);
  std::copy(frame.data(), frame.data() + frame.size(), padded.begin());

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);  // full spectrum, nfft bins

  std::vector<std::complex<double>> logmag(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k)
    logmag[k] = std::log(std::abs(spectrum[k]) + 1e-10);
  std::vector<std::complex<double>> cepstrum;
  fft.inv(cepstrum, logmag);  // scaled by 1/nfft

  VectorX<double> c(kPsccDim);
  for (Index n = 1; n <= kPsccDim; ++n) c(n - 1) = cepstrum[n].real();
  return c;
}

FeatureMatrix extract_features(const AudioClip& clip,
                               const ExtractOptions& options) {
  Eigen::Map<const VectorX<double>> raw(clip.samples.data(),
                                        Index(clip.samples.size()));
  const VectorX<double> emphasized =
      preemphasize(raw, options.preemphasis, options.remove_dc);
  AudioClip filtered{
      std::vector<double>(emphasized.data(),
                          emphasized.data() + emphasized.size()),
      clip.sample_rate};
  const MatrixX<double> frames = frame_and_window(filtered, options.frame);

  FeatureMatrix out;
  out.values.resize(frames.rows(), kFeatureDim);
  out.mask.resize(frames.rows());
  for (Index t = 0; t < frames.rows(); ++t) {
    const VectorX<double> frame = frames.row(t).transpose();
    const LpccStack lpcc = extract_lpcc_stack(frame);
    out.mask(t) = lpcc.valid;
    out.values.row(t).head(kLpccDim) = lpcc.values.transpose();
    if (lpcc.valid)
      out.values.row(t).tail(kPsccDim) =
          extract_pscc_surrogate(frame).transpose();
    else
      out.values.row(t).tail(kPsccDim).setZero();
  }
  return out;
}

NormStats fit_norm(std::span<const FeatureMatrix> features) {
  if (features.empty())
    throw Error(Errc::bad_argument, "fit_norm: no feature matrices");
  const Index dim = features.front().values.cols();
  VectorX<double> sum = VectorX<double>::Zero(dim);
  Index count = 0;
  for (const auto& fm : features) {
    if (fm.values.cols() != dim)
      throw Error(Errc::shape_mismatch, "fit_norm: inconsistent feature width");
    for (Index t = 0; t < fm.frames(); ++t)
      if (fm.mask(t)) {
        sum += fm.values.row(t).transpose();
        ++count;
      }
  }
  if (count == 0)
    throw Error(Errc::bad_argument, "fit_norm: no valid frames");

  NormStats stats;
  stats.mean = sum / double(count);
  VectorX<double> sq = VectorX<double>::Zero(dim);
  for (const auto& fm : features)
    for (Index t = 0; t < fm.frames(); ++t)
      if (fm.mask(t))
        sq += (fm.values.row(t).transpose() - stats.mean).cwiseAbs2();
  stats.std = (sq / double(count)).cwiseSqrt().cwiseMax(kNormStdFloor);
  return stats;
}

FeatureMatrix apply_norm(const FeatureMatrix& features, const NormStats& stats) {
  if (features.values.cols() != stats.mean.size())
    throw Error(Errc::shape_mismatch, "apply_norm: feature width " +
                                          std::to_string(features.values.cols()) +
                                          " != stats width " +
                                          std::to_string(stats.mean.size()));
  FeatureMatrix out = features;
  out.values = ((features.values.rowwise() - stats.mean.transpose()).array()
                    .rowwise() /
                stats.std.transpose().array())
                   .matrix();
  // Invalid frames stay at zero so they look like padding downstream.
  for (Index t = 0; t < out.frames(); ++t)
    if (!out.mask(t)) out.values.row(t).setZero();
  return out;
}

}  // namespace ftrack
