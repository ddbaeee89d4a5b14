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

// Forward and backward passes for the network's operators. Each backward
// function returns the input gradient and overwrites the parameter
// gradients it is given.

#ifndef FTRACK_LAYERS_HPP
#define FTRACK_LAYERS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ftrack/tensor.hpp"

namespace ftrack {

inline constexpr Index kKernelSize = 3;

enum class Mode { train, infer };

template <typename Scalar>
struct Conv1dParams {
  MatrixX<Scalar> weight;  // (3 * C_in) x C_out, tap-major row blocks
  RowVectorX<Scalar> bias;

  Index in_channels() const { return weight.rows() / kKernelSize; }
  Index out_channels() const { return weight.cols(); }
  auto tap(Index j) const { return weight.middleRows(j * in_channels(), in_channels()); }
};

template <typename Scalar>
struct BatchNormParams {
  RowVectorX<Scalar> gamma, beta;
  RowVectorX<Scalar> running_mean, running_var;
};

template <typename Scalar>
struct GluParams {
  MatrixX<Scalar> w, v;  // C x C pointwise maps
  RowVectorX<Scalar> b, c;
};

template <typename Scalar>
struct DenseParams {
  MatrixX<Scalar> w;  // C_in x C_out
  RowVectorX<Scalar> b;
};

namespace detail {

[[noreturn]] inline void shape_error(const std::string& what) {
  throw Error(Errc::shape_mismatch, what);
}

}  // namespace detail

/// Zeroes every row flagged invalid in `mask`.
template <typename Scalar>
void apply_mask(Tensor3<Scalar>& x, const Mask& mask) {
  if (mask.batch != x.batch || mask.time != x.time)
    detail::shape_error("mask shape does not match tensor " + shape_string(x));
  for (Index r = 0; r < x.rows(); ++r)
    if (!mask.valid(r)) x.data.row(r).setZero();
}

// ---------------------------------------------------------------------------
// Dilated convolution, kernel 3, symmetric zero padding.

/// y[t] = b + x[t-d] W_0 + x[t] W_1 + x[t+d] W_2, zero outside [0, T).
template <typename Scalar>
Tensor3<Scalar> dilated_conv1d_same(const Tensor3<Scalar>& x,
                                    const Conv1dParams<Scalar>& p,
                                    Index dilation) {
  const Index cin = p.in_channels();
  if (x.channels() != cin || p.weight.rows() != kKernelSize * cin ||
      p.bias.size() != p.out_channels())
    detail::shape_error("conv: input " + shape_string(x) + " vs weight " +
                        std::to_string(p.weight.rows()) + "x" +
                        std::to_string(p.weight.cols()));
  if (dilation < 1) detail::shape_error("conv: dilation must be >= 1");

  Tensor3<Scalar> y(x.batch, x.time, p.out_channels());
  y.data.noalias() = x.data * p.tap(1);
  y.data.rowwise() += p.bias;
  const Index len = x.time - dilation;
  if (len <= 0) return y;
  for (Index b = 0; b < x.batch; ++b) {
    auto xb = x.sequence(b);
    auto yb = y.sequence(b);
    yb.bottomRows(len).noalias() += xb.topRows(len) * p.tap(0);  // x[t-d]
    yb.topRows(len).noalias() += xb.bottomRows(len) * p.tap(2);  // x[t+d]
  }
  return y;
}

template <typename Scalar>
Tensor3<Scalar> dilated_conv1d_same_backward(const Tensor3<Scalar>& x,
                                             const Tensor3<Scalar>& dy,
                                             const Conv1dParams<Scalar>& p,
                                             Index dilation,
                                             Conv1dParams<Scalar>& grad) {
  const Index cin = p.in_channels();
  grad.weight.setZero(p.weight.rows(), p.weight.cols());
  Tensor3<Scalar> dx(x.batch, x.time, cin);
  dx.data.noalias() = dy.data * p.tap(1).transpose();
  grad.weight.middleRows(cin, cin).noalias() = x.data.transpose() * dy.data;
  grad.bias = dy.data.colwise().sum();
  const Index len = x.time - dilation;
  if (len <= 0) return dx;
  for (Index b = 0; b < x.batch; ++b) {
    auto xb = x.sequence(b);
    auto dyb = dy.sequence(b);
    auto dxb = dx.sequence(b);
    dxb.topRows(len).noalias() += dyb.bottomRows(len) * p.tap(0).transpose();
    grad.weight.topRows(cin).noalias() +=
        xb.topRows(len).transpose() * dyb.bottomRows(len);
    dxb.bottomRows(len).noalias() += dyb.topRows(len) * p.tap(2).transpose();
    grad.weight.bottomRows(cin).noalias() +=
        xb.bottomRows(len).transpose() * dyb.topRows(len);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization with statistics over valid frames only.

template <typename Scalar>
struct BatchNormCache {
  MatrixX<Scalar> xhat;
  RowVectorX<Scalar> inv_std;
  RowVectorX<Scalar> batch_mean, batch_var;
  Index count = 0;
  Mode mode = Mode::train;
};

/// Train mode normalizes with the valid frames' mean and (biased) variance;
/// infer mode uses the running statistics. Padding rows get the same affine
/// map but never enter the statistics.
template <typename Scalar>
Tensor3<Scalar> batch_norm_masked(const Tensor3<Scalar>& x, const Mask& mask,
                                  const BatchNormParams<Scalar>& p, Mode mode,
                                  Scalar eps, BatchNormCache<Scalar>* cache = nullptr) {
  const Index c = x.channels();
  if (p.gamma.size() != c || p.beta.size() != c)
    detail::shape_error("batch norm: channel count mismatch");
  if (mask.batch != x.batch || mask.time != x.time)
    detail::shape_error("batch norm: mask shape mismatch");

  BatchNormCache<Scalar> local;
  BatchNormCache<Scalar>& st = cache ? *cache : local;
  st.mode = mode;
  if (mode == Mode::train) {
    st.count = mask.count();
    if (st.count == 0)
      throw Error(Errc::bad_argument, "batch norm: zero valid frames");
    if (st.count < 2)
      throw Error(Errc::bad_argument,
                  "batch norm: train mode needs at least 2 valid frames");
    const VectorX<Scalar> w = mask.weights<Scalar>();
    st.batch_mean = (w.transpose() * x.data) / Scalar(st.count);
    st.xhat = x.data.rowwise() - st.batch_mean;
    st.batch_var =
        (w.transpose() * st.xhat.cwiseAbs2()) / Scalar(st.count);
    st.inv_std = (st.batch_var.array() + eps).rsqrt().matrix();
  } else {
    st.count = mask.count();
    st.xhat = x.data.rowwise() - p.running_mean;
    st.inv_std = (p.running_var.array() + eps).rsqrt().matrix();
  }
  st.xhat = st.xhat * st.inv_std.asDiagonal();

  Tensor3<Scalar> y(x.batch, x.time, c);
  y.data = st.xhat * p.gamma.asDiagonal();
  y.data.rowwise() += p.beta;
  return y;
}

/// running <- momentum * running + (1 - momentum) * batch statistic.
template <typename Scalar>
void update_running_stats(BatchNormParams<Scalar>& p,
                          const BatchNormCache<Scalar>& cache,
                          Scalar momentum) {
  p.running_mean = momentum * p.running_mean + (1 - momentum) * cache.batch_mean;
  p.running_var = momentum * p.running_var + (1 - momentum) * cache.batch_var;
}

template <typename Scalar>
Tensor3<Scalar> batch_norm_masked_backward(const Tensor3<Scalar>& dy,
                                           const Mask& mask,
                                           const BatchNormParams<Scalar>& p,
                                           const BatchNormCache<Scalar>& cache,
                                           BatchNormParams<Scalar>& grad) {
  grad.gamma = (dy.data.cwiseProduct(cache.xhat)).colwise().sum();
  grad.beta = dy.data.colwise().sum();

  const MatrixX<Scalar> g = dy.data * p.gamma.asDiagonal();
  Tensor3<Scalar> dx(dy.batch, dy.time, dy.channels());
  if (cache.mode == Mode::infer) {
    dx.data = g * cache.inv_std.asDiagonal();
    return dx;
  }
  // Batch statistics depend on valid rows only, but every row's output
  // depends on them.
  const Scalar n = Scalar(cache.count);
  const RowVectorX<Scalar> sum_g = g.colwise().sum() / n;
  const RowVectorX<Scalar> sum_gx = g.cwiseProduct(cache.xhat).colwise().sum() / n;
  dx.data = g;
  for (Index r = 0; r < dx.rows(); ++r)
    if (mask.valid(r))
      dx.data.row(r) -= sum_g + cache.xhat.row(r).cwiseProduct(sum_gx);
  dx.data = dx.data * cache.inv_std.asDiagonal();
  return dx;
}

// ---------------------------------------------------------------------------
// Gated linear unit: (x W + b) * sigmoid(x V + c), pointwise in time.

template <typename Scalar>
struct GluCache {
  MatrixX<Scalar> linear;
  MatrixX<Scalar> gate;
};

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

template <typename Scalar>
Tensor3<Scalar> glu(const Tensor3<Scalar>& x, const GluParams<Scalar>& p,
                    GluCache<Scalar>* cache = nullptr) {
  if (p.w.rows() != x.channels() || p.v.rows() != x.channels() ||
      p.w.cols() != p.v.cols() || p.b.size() != p.w.cols() ||
      p.c.size() != p.v.cols())
    detail::shape_error("glu: parameter shapes do not match input " +
                        shape_string(x));
  GluCache<Scalar> local;
  GluCache<Scalar>& st = cache ? *cache : local;
  st.linear.noalias() = x.data * p.w;
  st.linear.rowwise() += p.b;
  st.gate.noalias() = x.data * p.v;
  st.gate.rowwise() += p.c;
  st.gate = st.gate.unaryExpr([](Scalar z) { return sigmoid(z); });

  Tensor3<Scalar> y(x.batch, x.time, p.w.cols());
  y.data = st.linear.cwiseProduct(st.gate);
  return y;
}

template <typename Scalar>
Tensor3<Scalar> glu_backward(const Tensor3<Scalar>& x, const Tensor3<Scalar>& dy,
                             const GluParams<Scalar>& p,
                             const GluCache<Scalar>& cache,
                             GluParams<Scalar>& grad) {
  const MatrixX<Scalar> dlin = dy.data.cwiseProduct(cache.gate);
  const MatrixX<Scalar> dpre =
      (dy.data.array() * cache.linear.array() * cache.gate.array() *
       (Scalar(1) - cache.gate.array()))
          .matrix();
  grad.w.noalias() = x.data.transpose() * dlin;
  grad.v.noalias() = x.data.transpose() * dpre;
  grad.b = dlin.colwise().sum();
  grad.c = dpre.colwise().sum();
  Tensor3<Scalar> dx(x.batch, x.time, x.channels());
  dx.data.noalias() = dlin * p.w.transpose();
  dx.data.noalias() += dpre * p.v.transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// Channel (spatial) dropout: one keep/drop draw per (sequence, channel),
// shared by all time steps.

/// B x C multipliers: 0 for dropped channels, 1/(1-p) for survivors.
template <typename Scalar>
MatrixX<Scalar> draw_channel_dropout(Index batch, Index channels, double p,
                                     std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0))
    throw Error(Errc::bad_argument, "channel dropout: rate must be in [0, 1)",
                ErrorKind::usage);
  MatrixX<Scalar> keep(batch, channels);
  std::mt19937_64 rng(seed);
  const Scalar scale = Scalar(1.0 / (1.0 - p));
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < channels; ++c)
      keep(b, c) = uniform01(rng) < p ? Scalar(0) : scale;
  return keep;
}

template <typename Scalar>
Tensor3<Scalar> channel_dropout(const Tensor3<Scalar>& x, double p, Mode mode,
                                std::uint64_t seed,
                                MatrixX<Scalar>* keep_out = nullptr) {
  if (!(p >= 0.0 && p < 1.0))
    throw Error(Errc::bad_argument, "channel dropout: rate must be in [0, 1)",
                ErrorKind::usage);
  if (mode == Mode::infer || p == 0.0) {
    if (keep_out) keep_out->setOnes(x.batch, x.channels());
    return x;
  }
  const MatrixX<Scalar> keep =
      draw_channel_dropout<Scalar>(x.batch, x.channels(), p, seed);
  Tensor3<Scalar> y = x;
  for (Index b = 0; b < x.batch; ++b)
    y.sequence(b) = y.sequence(b) * keep.row(b).asDiagonal();
  if (keep_out) *keep_out = keep;
  return y;
}

template <typename Scalar>
Tensor3<Scalar> channel_dropout_backward(const Tensor3<Scalar>& dy,
                                         const MatrixX<Scalar>& keep) {
  Tensor3<Scalar> dx = dy;
  for (Index b = 0; b < dy.batch; ++b)
    dx.sequence(b) = dx.sequence(b) * keep.row(b).asDiagonal();
  return dx;
}

// ---------------------------------------------------------------------------
// Channel concatenation.

template <typename Scalar>
Tensor3<Scalar> concat_channels(std::span<const Tensor3<Scalar>> xs) {
  if (xs.empty()) detail::shape_error("concat: no inputs");
  Index total = 0;
  for (const auto& x : xs) {
    if (x.batch != xs[0].batch || x.time != xs[0].time)
      detail::shape_error("concat: " + shape_string(x) + " vs " +
                          shape_string(xs[0]));
    total += x.channels();
  }
  Tensor3<Scalar> y(xs[0].batch, xs[0].time, total);
  Index off = 0;
  for (const auto& x : xs) {
    y.data.middleCols(off, x.channels()) = x.data;
    off += x.channels();
  }
  return y;
}

/// Splits a concatenated gradient back into pieces of the given widths.
template <typename Scalar>
std::vector<Tensor3<Scalar>> concat_channels_backward(
    const Tensor3<Scalar>& dy, std::span<const Index> widths) {
  std::vector<Tensor3<Scalar>> out;
  out.reserve(widths.size());
  Index off = 0;
  for (Index w : widths) {
    Tensor3<Scalar> piece(dy.batch, dy.time, w);
    piece.data = dy.data.middleCols(off, w);
    out.push_back(std::move(piece));
    off += w;
  }
  if (off != dy.channels())
    detail::shape_error("concat backward: widths do not sum to channels");
  return out;
}

// ---------------------------------------------------------------------------
// Time-distributed dense layer.

enum class Activation { linear, relu };

template <typename Scalar>
Tensor3<Scalar> dense_td(const Tensor3<Scalar>& x, const DenseParams<Scalar>& p,
                         Activation act, MatrixX<Scalar>* preact = nullptr) {
  if (p.w.rows() != x.channels() || p.b.size() != p.w.cols())
    detail::shape_error("dense: weight " + std::to_string(p.w.rows()) + "x" +
                        std::to_string(p.w.cols()) + " vs input " +
                        shape_string(x));
  Tensor3<Scalar> y(x.batch, x.time, p.w.cols());
  y.data.noalias() = x.data * p.w;
  y.data.rowwise() += p.b;
  if (preact) *preact = y.data;
  if (act == Activation::relu) y.data = y.data.cwiseMax(Scalar(0));
  return y;
}

template <typename Scalar>
Tensor3<Scalar> dense_td_backward(const Tensor3<Scalar>& x,
                                  const Tensor3<Scalar>& dy,
                                  const DenseParams<Scalar>& p, Activation act,
                                  const MatrixX<Scalar>& preact,
                                  DenseParams<Scalar>& grad) {
  MatrixX<Scalar> dpre = dy.data;
  if (act == Activation::relu)
    dpre = (preact.array() > Scalar(0)).select(dpre, Scalar(0));
  grad.w.noalias() = x.data.transpose() * dpre;
  grad.b = dpre.colwise().sum();
  Tensor3<Scalar> dx(x.batch, x.time, x.channels());
  dx.data.noalias() = dpre * p.w.transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// Losses over B*T prediction vectors.

/// Mean |pred - target| over valid frames of the whole batch. If `grad` is
/// given it receives d(loss)/d(pred).
template <typename Scalar>
Scalar masked_mae(const VectorX<Scalar>& pred, const VectorX<Scalar>& target,
                  const Mask& mask, VectorX<Scalar>* grad = nullptr) {
  if (pred.size() != target.size() || pred.size() != mask.valid.size())
    detail::shape_error("masked_mae: size mismatch");
  const Index n = mask.count();
  if (n == 0) throw Error(Errc::bad_argument, "masked_mae: zero valid frames");
  Scalar sum = 0;
  if (grad) grad->setZero(pred.size());
  for (Index i = 0; i < pred.size(); ++i) {
    if (!mask.valid(i)) continue;
    const Scalar diff = pred(i) - target(i);
    sum += std::abs(diff);
    if (grad) (*grad)(i) = Scalar((diff > 0) - (diff < 0)) / Scalar(n);
  }
  return sum / Scalar(n);
}

struct LossWeights {
  double f1 = 1.0 / 3.0;
  double f2 = 1.0 / 3.0;
  double f3 = 1.0 / 3.0;

  double operator[](int k) const { return k == 0 ? f1 : (k == 1 ? f2 : f3); }
};

/// alpha * L_F1 + beta * L_F2 + gamma * L_F3.
template <typename Scalar>
Scalar combined_loss(std::span<const VectorX<Scalar>, 3> preds,
                     std::span<const VectorX<Scalar>, 3> targets,
                     const Mask& mask, const LossWeights& weights = {},
                     std::array<VectorX<Scalar>, 3>* grads = nullptr) {
  Scalar total = 0;
  for (int k = 0; k < 3; ++k) {
    if (weights[k] < 0)
      throw Error(Errc::bad_argument, "combined_loss: negative weight",
                  ErrorKind::usage);
    VectorX<Scalar>* g = grads ? &(*grads)[k] : nullptr;
    total += Scalar(weights[k]) * masked_mae(preds[k], targets[k], mask, g);
    if (g) *g *= Scalar(weights[k]);
  }
  return total;
}

}  // namespace ftrack

#endif  // FTRACK_LAYERS_HPP
