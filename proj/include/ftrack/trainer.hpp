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

// Adam optimization over padded, masked utterance batches.

#ifndef FTRACK_TRAINER_HPP
#define FTRACK_TRAINER_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftrack/dataset.hpp"
#include "ftrack/model.hpp"

namespace ftrack {

struct TrainConfig {
  double lr_initial = 0.001;
  double lr_after_drop = 0.0005;
  Index lr_drop_epoch = 50;  // last epoch at lr_initial
  Index max_epochs = 100;
  Index batch_utterances = 4;
  Index max_frames = 710;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  double clip_norm = 0.0;  // global gradient norm clip; 0 disables

  void validate() const;
  std::string to_text() const;
  /// Applies one `key = value` pair; returns false for an unknown key.
  bool set(const std::string& key, const std::string& value);
};

/// Labelled random streams derived from TrainConfig::seed.
enum class Stream : std::uint64_t { init = 1, dropout = 2, shuffle = 3, corpus = 4 };
inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return mix_seed(seed, static_cast<std::uint64_t>(s));
}

double lr_schedule(Index epoch, const TrainConfig& config = {});

struct AdamState {
  std::vector<MatrixX<double>> m;  // one per trainable tensor
  std::vector<MatrixX<double>> v;
  std::int64_t t = 0;

  static AdamState zeros_like(const ModelWeights& w);
};

/// One Adam update of a single coordinate; `t` is the step after increment.
inline void adam_update(double& theta, double g, double& m, double& v,
                        std::int64_t t, double lr, double beta1, double beta2,
                        double eps) {
  m = beta1 * m + (1.0 - beta1) * g;
  v = beta2 * v + (1.0 - beta2) * g * g;
  const double mhat = m / (1.0 - std::pow(beta1, double(t)));
  const double vhat = v / (1.0 - std::pow(beta2, double(t)));
  theta -= lr * mhat / (std::sqrt(vhat) + eps);
}

/// Updates every trainable tensor of `w`. Throws (numerical) naming the
/// first parameter with a non-finite gradient, before any update.
void adam_step(ModelWeights& w, const ModelWeights& grads, AdamState& state,
               double lr, const TrainConfig& config = {});

/// Global L2 norm over the trainable gradients.
double gradient_norm(const ModelWeights& grads);

struct Batch {
  std::vector<std::size_t> utterances;  // indices into the dataset
  Tensor3<double> features;             // B x max_frames x D, zero padded
  Mask mask;                            // padding only
  Mask loss_mask;                       // padding, edge silence, undefined
  std::array<VectorX<double>, 3> targets;  // target_scale units

  Index batch() const { return features.batch; }
  /// Longest unpadded utterance in the batch.
  Index valid_length() const;
  /// Copy without the trailing all-padding frames. Every output is
  /// unchanged because padding behaves as the convolutions' zero border.
  Batch cropped() const;
};

/// Splits `utterances` into padded batches. With a shuffle seed the order
/// is a seeded Fisher-Yates permutation; otherwise dataset order is kept.
std::vector<Batch> make_batches(std::span<const Utterance> utterances,
                                const TrainConfig& config,
                                std::optional<std::uint64_t> shuffle_seed,
                                double target_scale = 1000.0);

/// Loss-mask frames of one utterance: speech span from the first to the
/// last is_speech frame, valid features, all three targets defined.
ArrayXb loss_frames(const Utterance& utt);

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainRecord {
  std::vector<EpochRecord> epochs;
  Index best_epoch = 0;

  /// `epoch,train_loss,val_loss,lr,seconds`
  std::string to_csv(bool with_seconds = true) const;
};

struct TrainHooks {
  /// Called after every epoch with the current and best weights; returning
  /// false stops training.
  std::function<bool(const EpochRecord&, const ModelWeights& current,
                     const ModelWeights& best)>
      on_epoch;
  /// When set, the best weights are saved here (atomically) on improvement.
  std::optional<std::filesystem::path> checkpoint;
};

struct TrainResult {
  ModelWeights best;
  TrainRecord record;
};

/// Combined loss pooled over every loss-mask frame, infer mode.
double dataset_loss(const ModelWeights& w, std::span<const Utterance> data,
                    const TrainConfig& config);

/// Predictions in Hz for one utterance, infer mode.
MatrixX<double> predict_hz(const ModelWeights& w, const Utterance& utt);
MatrixX<double> predict_hz(const ModelWeights& w, const FeatureMatrix& features);

/// Mean |pred - target| in Hz over loss-mask frames and all three formants.
double dataset_mae_hz(const ModelWeights& w, std::span<const Utterance> data);

TrainResult train(const ModelConfig& model_config, const TrainConfig& config,
                  std::span<const Utterance> train_set,
                  std::span<const Utterance> val_set,
                  const TrainHooks& hooks = {});

}  // namespace ftrack

#endif  // FTRACK_TRAINER_HPP
