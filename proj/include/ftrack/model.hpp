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

// Densely connected, non-causal gated TCN with three formant heads.
//
//   H0 = features (padding rows zeroed)
//   H_i = mask * dropout(GLU(BN(conv_{d_i}(concat(H0, H1, ..., H_{i-1})))))
//   head_k = dense(1, linear)(dense(256, relu)(concat(H1..H9)))
//
// Predictions are in units of `target_scale` Hz (kHz by default).

#ifndef FTRACK_MODEL_HPP
#define FTRACK_MODEL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ftrack/layers.hpp"

namespace ftrack {

inline constexpr double kBatchNormEps = 1e-5;

enum class HeadInput { concat_all_blocks, last_block };

struct ModelConfig {
  Index n_blocks = 9;
  std::vector<Index> dilations{1, 2, 4, 1, 2, 4, 1, 2, 4};
  Index channels = 64;
  Index kernel = 3;
  Index head_width = 256;
  Index input_dim = 350;
  double dropout_p = 0.1;
  double bn_momentum = 0.99;  // running <- m * running + (1 - m) * batch
  bool include_input_in_dense = true;
  HeadInput head_input = HeadInput::concat_all_blocks;
  double target_scale = 1000.0;

  void validate() const;

  /// Index range [first, first + count) of H tensors feeding block i
  /// (1-based); H0 is the input.
  std::pair<Index, Index> block_sources(Index i) const;
  Index block_input_channels(Index i) const;
  std::pair<Index, Index> head_sources() const;
  Index head_input_channels() const;
  /// Frames on each side that can influence one output frame.
  Index receptive_radius() const;

  /// `key = value` lines, keys named after the fields above.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  /// Applies one `key = value` pair; returns false for an unknown key.
  bool set(const std::string& key, const std::string& value);

  bool operator==(const ModelConfig&) const = default;
};

/// Tiny configuration used by the gradient checks.
ModelConfig tiny_model_config();

template <typename Scalar>
struct BlockWeights {
  Conv1dParams<Scalar> conv;
  BatchNormParams<Scalar> bn;
  GluParams<Scalar> glu;
};

template <typename Scalar>
struct HeadWeights {
  DenseParams<Scalar> hidden;
  DenseParams<Scalar> out;
};

template <typename Scalar>
struct BasicModelWeights {
  ModelConfig config;
  std::vector<BlockWeights<Scalar>> blocks;
  std::array<HeadWeights<Scalar>, 3> heads;

  template <typename Other>
  BasicModelWeights<Other> cast() const;
};

using ModelWeights = BasicModelWeights<double>;

/// Visits every tensor as f(name, tensor, trainable) in a fixed order. This
/// order defines serialization, initialization draws and optimizer state.
template <typename Weights, typename F>
void for_each_tensor(Weights& w, F&& f) {
  for (std::size_t i = 0; i < w.blocks.size(); ++i) {
    auto& blk = w.blocks[i];
    const std::string p = "block" + std::to_string(i + 1) + ".";
    f(p + "conv.weight", blk.conv.weight, true);
    f(p + "conv.bias", blk.conv.bias, true);
    f(p + "bn.gamma", blk.bn.gamma, true);
    f(p + "bn.beta", blk.bn.beta, true);
    f(p + "bn.running_mean", blk.bn.running_mean, false);
    f(p + "bn.running_var", blk.bn.running_var, false);
    f(p + "glu.w", blk.glu.w, true);
    f(p + "glu.b", blk.glu.b, true);
    f(p + "glu.v", blk.glu.v, true);
    f(p + "glu.c", blk.glu.c, true);
  }
  for (std::size_t k = 0; k < w.heads.size(); ++k) {
    auto& head = w.heads[k];
    const std::string p = "head" + std::to_string(k + 1) + ".";
    f(p + "hidden.weight", head.hidden.w, true);
    f(p + "hidden.bias", head.hidden.b, true);
    f(p + "out.weight", head.out.w, true);
    f(p + "out.bias", head.out.b, true);
  }
}

template <typename Scalar>
template <typename Other>
BasicModelWeights<Other> BasicModelWeights<Scalar>::cast() const {
  BasicModelWeights<Other> out;
  out.config = config;
  out.blocks.resize(blocks.size());
  std::vector<MatrixX<Scalar>> flat;
  for_each_tensor(*this, [&](const std::string&, const auto& t, bool) {
    flat.emplace_back(t);
  });
  std::size_t idx = 0;
  for_each_tensor(out, [&](const std::string&, auto& t, bool) {
    t = flat[idx++].template cast<Other>();
  });
  return out;
}

/// Weights with the shapes implied by `config`, all zero.
ModelWeights zero_weights(const ModelConfig& config);
/// Glorot-uniform weights, zero biases, identity batch norm; deterministic
/// in `seed`.
ModelWeights build(const ModelConfig& config, std::uint64_t seed);

template <typename Scalar>
struct BlockCache {
  Tensor3<Scalar> input;
  BatchNormCache<Scalar> bn;
  Tensor3<Scalar> bn_out;
  GluCache<Scalar> glu;
  MatrixX<Scalar> keep;
};

template <typename Scalar>
struct ForwardCache {
  Mode mode = Mode::infer;
  std::vector<Tensor3<Scalar>> hs;  // hs[0] = masked input
  std::vector<BlockCache<Scalar>> blocks;
  Tensor3<Scalar> head_in;
  std::array<Tensor3<Scalar>, 3> hidden;
  std::array<MatrixX<Scalar>, 3> hidden_pre;
  std::array<MatrixX<Scalar>, 3> out_pre;
};

using Predictions = std::array<VectorX<double>, 3>;

/// Runs the network. `features` is B x T x input_dim, `mask` marks the
/// non-padding frames. Returns three B*T prediction vectors in
/// target_scale units.
template <typename Scalar>
std::array<VectorX<Scalar>, 3> forward(const BasicModelWeights<Scalar>& w,
                                       const Tensor3<Scalar>& features,
                                       const Mask& mask, Mode mode,
                                       std::uint64_t dropout_seed = 0,
                                       ForwardCache<Scalar>* cache = nullptr) {
  const ModelConfig& cfg = w.config;
  if (features.channels() != cfg.input_dim)
    throw Error(Errc::shape_mismatch,
                "forward: expected " + std::to_string(cfg.input_dim) +
                    " input channels, got " + std::to_string(features.channels()));
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  c.mode = mode;
  c.hs.clear();
  c.blocks.assign(cfg.n_blocks, {});
  c.hs.reserve(cfg.n_blocks + 1);
  c.hs.push_back(features);
  apply_mask(c.hs[0], mask);

  for (Index i = 1; i <= cfg.n_blocks; ++i) {
    const auto& blk = w.blocks[i - 1];
    auto& bc = c.blocks[i - 1];
    const auto [first, count] = cfg.block_sources(i);
    bc.input = concat_channels(
        std::span<const Tensor3<Scalar>>(c.hs).subspan(first, count));
    const Tensor3<Scalar> conv =
        dilated_conv1d_same(bc.input, blk.conv, cfg.dilations[i - 1]);
    bc.bn_out =
        batch_norm_masked(conv, mask, blk.bn, mode, Scalar(kBatchNormEps), &bc.bn);
    const Tensor3<Scalar> gated = glu(bc.bn_out, blk.glu, &bc.glu);
    Tensor3<Scalar> h = channel_dropout(gated, cfg.dropout_p, mode,
                                        mix_seed(dropout_seed, std::uint64_t(i)),
                                        &bc.keep);
    apply_mask(h, mask);
    c.hs.push_back(std::move(h));
  }

  const auto [hfirst, hcount] = cfg.head_sources();
  c.head_in = concat_channels(
      std::span<const Tensor3<Scalar>>(c.hs).subspan(hfirst, hcount));
  std::array<VectorX<Scalar>, 3> preds;
  for (int k = 0; k < 3; ++k) {
    c.hidden[k] = dense_td(c.head_in, w.heads[k].hidden, Activation::relu,
                           &c.hidden_pre[k]);
    const Tensor3<Scalar> out =
        dense_td(c.hidden[k], w.heads[k].out, Activation::linear, &c.out_pre[k]);
    preds[k] = out.data.col(0);
  }
  return preds;
}

/// Gradients of a scalar loss given d(loss)/d(predictions). The result has
/// the shape of the weights; running statistics entries are zero. If
/// `d_features` is set it receives the input gradient.
ModelWeights backward(const ModelWeights& w, const ForwardCache<double>& cache,
                      const Mask& mask, const Predictions& d_preds,
                      Tensor3<double>* d_features = nullptr);

/// Folds the train-mode batch statistics of `cache` into the running
/// statistics.
void commit_batch_stats(ModelWeights& w, const ForwardCache<double>& cache);

/// Weight file: "FTRKMODL", u32 version, u64 header length, header text
/// (config lines, then `tensor <name> <rows> <cols> <byte offset>` lines),
/// then column-major little-endian float64 data.
void save(const ModelWeights& w, const std::filesystem::path& path);
std::string serialize(const ModelWeights& w);
ModelWeights load(const std::filesystem::path& path);
/// As load(), additionally requiring every tensor to match `expected`.
ModelWeights load(const std::filesystem::path& path, const ModelConfig& expected);
ModelWeights deserialize(const std::string& bytes, const std::string& origin,
                         const ModelConfig* expected = nullptr);

Index parameter_count(const ModelWeights& w, bool trainable_only = true);

}  // namespace ftrack

#endif  // FTRACK_MODEL_HPP
