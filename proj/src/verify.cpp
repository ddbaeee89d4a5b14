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

#include "ftrack/verify.hpp"

#include <random>

#include "ftrack/gradcheck.hpp"

namespace ftrack {

namespace {

/// Gradients are kept near 1e-6 so that the 1e-8 relative-error floor only
/// applies to coordinates two orders of magnitude below typical.
constexpr double kLossScale = 1e-6;

template <typename M>
void fill(M& m, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * uniform01(rng);
}

Tensor3<double> random_tensor(Index b, Index t, Index c, std::mt19937_64& rng) {
  Tensor3<double> x(b, t, c);
  fill(x.data, rng);
  return x;
}

/// Scaled projection of a layer output onto fixed random directions, taken
/// relative to the unperturbed output so that untouched elements cancel
/// exactly instead of adding rounding noise.
struct Projection {
  MatrixX<double> r;
  MatrixX<double> base;

  double operator()(const Tensor3<double>& y) const {
    return kLossScale * (y.data - base).cwiseProduct(r).sum();
  }
};

LayerGradReport report(std::string layer, bool linear, const GradCheckResult& r) {
  return {std::move(layer), linear, r.max_rel_error, r.worst, r.coordinates};
}

}  // namespace

std::vector<LayerGradReport> gradcheck_suite(const ModelConfig& config,
                                             const GradSuiteOptions& o) {
  config.validate();
  std::mt19937_64 rng(mix_seed(o.seed, 0x6C));
  const Index B = o.batch, T = o.time, C = config.channels;
  Mask mask(B, T, true);
  for (Index t = std::max<Index>(0, T - o.padded_frames); t < T; ++t)
    mask.valid((B - 1) * T + t) = false;
  std::vector<LayerGradReport> out;

  // Dilated convolution.
  {
    const Index cin = 2 * C, dil = 2;
    Tensor3<double> x = random_tensor(B, T, cin, rng);
    Conv1dParams<double> p{MatrixX<double>(kKernelSize * cin, C), RowVectorX<double>(C)};
    fill(p.weight, rng);
    fill(p.bias, rng);
    MatrixX<double> r(B * T, C);
    fill(r, rng);
    Tensor3<double> dy(B, T, C);
    dy.data = kLossScale * r;
    Conv1dParams<double> g;
    const Tensor3<double> dx = dilated_conv1d_same_backward(x, dy, p, dil, g);
    const Projection proj{r, dilated_conv1d_same(x, p, dil).data};
    auto loss = [&] { return proj(dilated_conv1d_same(x, p, dil)); };
    out.push_back(report("conv1d", true,
                         grad_check({grad_entry("x", x.data, dx.data),
                                     grad_entry("weight", p.weight, g.weight),
                                     grad_entry("bias", p.bias, g.bias)},
                                    loss, o.h)));
  }

  // Masked batch normalization, train mode.
  {
    Tensor3<double> x = random_tensor(B, T, C, rng);
    BatchNormParams<double> p{RowVectorX<double>(C), RowVectorX<double>(C),
                              RowVectorX<double>::Zero(C), RowVectorX<double>::Ones(C)};
    fill(p.gamma, rng, 0.5, 1.5);
    fill(p.beta, rng);
    MatrixX<double> r(B * T, C);
    fill(r, rng);
    BatchNormCache<double> cache;
    const Projection proj{
        r, batch_norm_masked(x, mask, p, Mode::train, kBatchNormEps, &cache).data};
    Tensor3<double> dy(B, T, C);
    dy.data = kLossScale * r;
    BatchNormParams<double> g;
    const Tensor3<double> dx = batch_norm_masked_backward(dy, mask, p, cache, g);
    auto loss = [&] {
      return proj(batch_norm_masked<double>(x, mask, p, Mode::train, kBatchNormEps));
    };
    out.push_back(report("batch_norm", false,
                         grad_check({grad_entry("x", x.data, dx.data),
                                     grad_entry("gamma", p.gamma, g.gamma),
                                     grad_entry("beta", p.beta, g.beta)},
                                    loss, o.h)));
  }

  // Gated linear unit.
  {
    Tensor3<double> x = random_tensor(B, T, C, rng);
    GluParams<double> p{MatrixX<double>(C, C), MatrixX<double>(C, C),
                        RowVectorX<double>(C), RowVectorX<double>(C)};
    fill(p.w, rng);
    fill(p.v, rng);
    fill(p.b, rng);
    fill(p.c, rng);
    MatrixX<double> r(B * T, C);
    fill(r, rng);
    GluCache<double> cache;
    glu(x, p, &cache);
    Tensor3<double> dy(B, T, C);
    dy.data = kLossScale * r;
    GluParams<double> g;
    const Tensor3<double> dx = glu_backward(x, dy, p, cache, g);
    const Projection proj{r, glu<double>(x, p).data};
    auto loss = [&] { return proj(glu<double>(x, p)); };
    out.push_back(report("glu", false,
                         grad_check({grad_entry("x", x.data, dx.data),
                                     grad_entry("w", p.w, g.w), grad_entry("b", p.b, g.b),
                                     grad_entry("v", p.v, g.v), grad_entry("c", p.c, g.c)},
                                    loss, o.h)));
  }

  // Channel dropout with a fixed draw.
  {
    Tensor3<double> x = random_tensor(B, T, C, rng);
    MatrixX<double> r(B * T, C);
    fill(r, rng);
    const std::uint64_t seed = mix_seed(o.seed, 0xD0);
    MatrixX<double> keep;
    channel_dropout(x, 0.5, Mode::train, seed, &keep);
    Tensor3<double> dy(B, T, C);
    dy.data = kLossScale * r;
    const Tensor3<double> dx = channel_dropout_backward(dy, keep);
    const Projection proj{r, channel_dropout(x, 0.5, Mode::train, seed).data};
    auto loss = [&] { return proj(channel_dropout(x, 0.5, Mode::train, seed)); };
    out.push_back(report("channel_dropout", true,
                         grad_check({grad_entry("x", x.data, dx.data)}, loss, o.h)));
  }

  // Channel concatenation.
  {
    std::vector<Tensor3<double>> xs{random_tensor(B, T, C, rng),
                                    random_tensor(B, T, 2 * C, rng)};
    const std::vector<Index> widths{C, 2 * C};
    MatrixX<double> r(B * T, 3 * C);
    fill(r, rng);
    Tensor3<double> dy(B, T, 3 * C);
    dy.data = kLossScale * r;
    const auto dxs = concat_channels_backward(dy, std::span<const Index>(widths));
    const Projection proj{r, concat_channels(std::span<const Tensor3<double>>(xs)).data};
    auto loss = [&] { return proj(concat_channels(std::span<const Tensor3<double>>(xs))); };
    out.push_back(report("concat", true,
                         grad_check({grad_entry("x0", xs[0].data, dxs[0].data),
                                     grad_entry("x1", xs[1].data, dxs[1].data)},
                                    loss, o.h)));
  }

  // Time-distributed dense layers.
  for (const Activation act : {Activation::linear, Activation::relu}) {
    const Index cin = C, cout = 2 * C;
    Tensor3<double> x = random_tensor(B, T, cin, rng);
    DenseParams<double> p{MatrixX<double>(cin, cout), RowVectorX<double>(cout)};
    fill(p.w, rng);
    fill(p.b, rng);
    MatrixX<double> r(B * T, cout);
    fill(r, rng);
    MatrixX<double> pre;
    dense_td(x, p, act, &pre);
    Tensor3<double> dy(B, T, cout);
    dy.data = kLossScale * r;
    DenseParams<double> g;
    const Tensor3<double> dx = dense_td_backward(x, dy, p, act, pre, g);
    const Projection proj{r, dense_td(x, p, act).data};
    auto loss = [&] { return proj(dense_td(x, p, act)); };
    out.push_back(report(act == Activation::linear ? "dense_linear" : "dense_relu",
                         act == Activation::linear,
                         grad_check({grad_entry("x", x.data, dx.data),
                                     grad_entry("w", p.w, g.w), grad_entry("b", p.b, g.b)},
                                    loss, o.h)));
  }

  // Combined masked MAE loss.
  {
    std::array<VectorX<double>, 3> preds, targets;
    for (int k = 0; k < 3; ++k) {
      preds[k].resize(B * T);
      targets[k].resize(B * T);
      fill(preds[k], rng);
      fill(targets[k], rng);
    }
    const LossWeights lw{0.2, 0.3, 0.5};
    std::array<VectorX<double>, 3> grads;
    combined_loss<double>(preds, targets, mask, lw, &grads);
    auto loss = [&] { return combined_loss<double>(preds, targets, mask, lw); };
    std::vector<GradCheckEntry> entries;
    for (int k = 0; k < 3; ++k)
      entries.push_back(grad_entry("pred" + std::to_string(k + 1), preds[k], grads[k]));
    out.push_back(report("combined_loss", false, grad_check(entries, loss, o.h)));
  }

  // Whole network, train mode with a fixed dropout draw.
  {
    ModelWeights w = build(config, mix_seed(o.seed, 0x7E));
    for_each_tensor(w, [&](const std::string& name, auto& t, bool trainable) {
      if (!trainable) return;
      if (name.find("bias") != std::string::npos || name.ends_with(".b") ||
          name.ends_with(".c") || name.ends_with("beta"))
        fill(t, rng, -0.2, 0.2);
      if (name.ends_with("gamma")) fill(t, rng, 0.5, 1.5);
    });
    Tensor3<double> x = random_tensor(B, T, config.input_dim, rng);
    std::array<VectorX<double>, 3> targets;
    for (auto& v : targets) {
      v.resize(B * T);
      fill(v, rng, 0.3, 3.0);
    }
    Mask loss_mask = mask;
    loss_mask.valid(0) = false;
    const std::uint64_t dseed = mix_seed(o.seed, 0xD1);
    auto loss = [&] {
      const auto preds = forward(w, x, mask, Mode::train, dseed);
      return kLossScale * combined_loss<double>(preds, targets, loss_mask);
    };
    ForwardCache<double> cache;
    const auto preds = forward(w, x, mask, Mode::train, dseed, &cache);
    Predictions d;
    combined_loss<double>(preds, targets, loss_mask, {}, &d);
    for (auto& v : d) v *= kLossScale;
    Tensor3<double> dx;
    ModelWeights g = backward(w, cache, mask, d, &dx);

    std::vector<GradCheckEntry> entries;
    std::vector<std::pair<std::string, const double*>> grads;
    for_each_tensor(g, [&](const std::string& name, const auto& t, bool trainable) {
      if (trainable) grads.emplace_back(name, t.data());
    });
    std::size_t i = 0;
    for_each_tensor(w, [&](const std::string& name, auto& t, bool trainable) {
      if (!trainable) return;
      entries.push_back({name, t.data(), grads[i++].second, t.size()});
    });
    entries.push_back(grad_entry("features", x.data, dx.data));
    out.push_back(report("network", false, grad_check(entries, loss, o.h)));
  }
  return out;
}

}  // namespace ftrack
