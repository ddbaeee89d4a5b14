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

#include "ftrack/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "config_util.hpp"

namespace ftrack {

using detail::format_double;

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw Error(Errc::bad_argument, "train config: " + m, ErrorKind::usage);
  };
  if (!(lr_initial > 0) || !(lr_after_drop > 0)) fail("learning rates must be > 0");
  if (lr_drop_epoch < 0) fail("lr_drop_epoch must be >= 0");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (batch_utterances < 1) fail("batch_utterances must be >= 1");
  if (max_frames < 1) fail("max_frames must be >= 1");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
    fail("Adam betas must lie in (0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be > 0");
  for (int k = 0; k < 3; ++k)
    if (!(loss_weights[k] > 0)) fail("loss weights must be > 0");
  if (!(clip_norm >= 0)) fail("clip_norm must be >= 0");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "lr_initial = " << format_double(lr_initial) << "\n"
     << "lr_after_drop = " << format_double(lr_after_drop) << "\n"
     << "lr_drop_epoch = " << lr_drop_epoch << "\n"
     << "max_epochs = " << max_epochs << "\n"
     << "batch_utterances = " << batch_utterances << "\n"
     << "max_frames = " << max_frames << "\n"
     << "beta1 = " << format_double(beta1) << "\n"
     << "beta2 = " << format_double(beta2) << "\n"
     << "epsilon = " << format_double(epsilon) << "\n"
     << "seed = " << seed << "\n"
     << "loss_weight_f1 = " << format_double(loss_weights.f1) << "\n"
     << "loss_weight_f2 = " << format_double(loss_weights.f2) << "\n"
     << "loss_weight_f3 = " << format_double(loss_weights.f3) << "\n"
     << "clip_norm = " << format_double(clip_norm) << "\n";
  return os.str();
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_index;
  using detail::parse_real;
  if (key == "lr_initial") lr_initial = parse_real(key, value);
  else if (key == "lr_after_drop") lr_after_drop = parse_real(key, value);
  else if (key == "lr_drop_epoch") lr_drop_epoch = parse_index(key, value);
  else if (key == "max_epochs") max_epochs = parse_index(key, value);
  else if (key == "batch_utterances") batch_utterances = parse_index(key, value);
  else if (key == "max_frames") max_frames = parse_index(key, value);
  else if (key == "beta1") beta1 = parse_real(key, value);
  else if (key == "beta2") beta2 = parse_real(key, value);
  else if (key == "epsilon") epsilon = parse_real(key, value);
  else if (key == "seed") seed = detail::parse_u64(key, value);
  else if (key == "loss_weight_f1") loss_weights.f1 = parse_real(key, value);
  else if (key == "loss_weight_f2") loss_weights.f2 = parse_real(key, value);
  else if (key == "loss_weight_f3") loss_weights.f3 = parse_real(key, value);
  else if (key == "clip_norm") clip_norm = parse_real(key, value);
  else return false;
  return true;
}

double lr_schedule(Index epoch, const TrainConfig& config) {
  if (epoch < 1)
    throw Error(Errc::bad_argument, "lr_schedule: epochs start at 1",
                ErrorKind::usage);
  return epoch <= config.lr_drop_epoch ? config.lr_initial
                                       : config.lr_after_drop;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const ModelWeights& w) {
  AdamState s;
  for_each_tensor(w, [&](const std::string&, const auto& t, bool trainable) {
    if (!trainable) return;
    s.m.push_back(MatrixX<double>::Zero(t.rows(), t.cols()));
    s.v.push_back(MatrixX<double>::Zero(t.rows(), t.cols()));
  });
  return s;
}

void adam_step(ModelWeights& w, const ModelWeights& grads, AdamState& state,
               double lr, const TrainConfig& config) {
  using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
  using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;
  std::vector<ConstArrayMap> g;
  for_each_tensor(grads, [&](const std::string& name, const auto& t, bool trainable) {
    if (!trainable) return;
    if (!t.allFinite())
      throw Error(Errc::non_finite, "non-finite gradient for " + name,
                  ErrorKind::numerical);
    g.emplace_back(t.data(), t.size());
  });
  if (state.m.empty()) state = AdamState::zeros_like(w);
  if (state.m.size() != g.size())
    throw Error(Errc::shape_mismatch, "adam_step: optimizer state does not match model");

  ++state.t;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.t));
  const double c2 = 1.0 - std::pow(b2, double(state.t));
  std::size_t i = 0;
  for_each_tensor(w, [&](const std::string& name, auto& t, bool trainable) {
    if (!trainable) return;
    const ConstArrayMap& gi = g[i];
    if (gi.size() != t.size() || state.m[i].size() != t.size())
      throw Error(Errc::shape_mismatch, "adam_step: shape mismatch for " + name);
    ArrayMap theta(t.data(), t.size());
    ArrayMap m(state.m[i].data(), t.size());
    ArrayMap v(state.v[i].data(), t.size());
    m = b1 * m + (1.0 - b1) * gi;
    v = b2 * v + (1.0 - b2) * gi.square();
    theta -= lr * (m / c1) / ((v / c2).sqrt() + config.epsilon);
    ++i;
  });
}

double gradient_norm(const ModelWeights& grads) {
  double sq = 0.0;
  for_each_tensor(grads, [&](const std::string&, const auto& t, bool trainable) {
    if (trainable) sq += t.squaredNorm();
  });
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Batching

ArrayXb loss_frames(const Utterance& utt) {
  const Index T = utt.frames();
  ArrayXb out = ArrayXb::Constant(T, false);
  Index first = -1, last = -1;
  for (Index t = 0; t < T; ++t)
    if (utt.is_speech(t)) {
      if (first < 0) first = t;
      last = t;
    }
  if (first < 0) return out;
  for (Index t = first; t <= last; ++t)
    out(t) = utt.features.mask(t) && (utt.targets_hz.row(t).array() > 0.0).all();
  return out;
}

Index Batch::valid_length() const {
  Index longest = 0;
  for (Index b = 0; b < mask.batch; ++b)
    for (Index t = mask.time; t > longest; --t)
      if (mask(b, t - 1)) {
        longest = t;
        break;
      }
  return longest;
}

Batch Batch::cropped() const {
  const Index L = std::max<Index>(valid_length(), 1);
  const Index B = batch(), T = features.time;
  Batch out;
  out.utterances = utterances;
  out.features = Tensor3<double>(B, L, features.channels());
  out.mask = Mask(B, L, false);
  out.loss_mask = Mask(B, L, false);
  for (auto& v : out.targets) v.resize(B * L);
  for (Index b = 0; b < B; ++b) {
    out.features.sequence(b) = features.data.middleRows(b * T, L);
    out.mask.valid.segment(b * L, L) = mask.valid.segment(b * T, L);
    out.loss_mask.valid.segment(b * L, L) = loss_mask.valid.segment(b * T, L);
    for (int k = 0; k < 3; ++k)
      out.targets[k].segment(b * L, L) = targets[k].segment(b * T, L);
  }
  return out;
}

namespace {

std::vector<std::size_t> utterance_order(std::size_t n,
                                         std::optional<std::uint64_t> seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!seed) return order;
  std::mt19937_64 rng(*seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * double(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  return order;
}

Batch assemble_batch(std::span<const Utterance> data,
                     std::vector<std::size_t> members, Index max_frames,
                     double target_scale) {
  const Index B = static_cast<Index>(members.size());
  const Index D = data[members.front()].features.values.cols();
  Batch batch;
  batch.features = Tensor3<double>::Zero(B, max_frames, D);
  batch.mask = Mask(B, max_frames, false);
  batch.loss_mask = Mask(B, max_frames, false);
  for (auto& v : batch.targets) v = VectorX<double>::Zero(B * max_frames);
  for (Index b = 0; b < B; ++b) {
    const Utterance& u = data[members[b]];
    const Index T = u.frames();
    if (u.features.values.cols() != D)
      throw Error(Errc::shape_mismatch,
                  u.id + ": feature width differs within the dataset");
    batch.features.data.middleRows(b * max_frames, T) = u.features.values;
    batch.mask.valid.segment(b * max_frames, T).setConstant(true);
    batch.loss_mask.valid.segment(b * max_frames, T) = loss_frames(u);
    for (int k = 0; k < 3; ++k)
      batch.targets[k].segment(b * max_frames, T) =
          u.targets_hz.col(k) / target_scale;
  }
  batch.utterances = std::move(members);
  return batch;
}

void check_lengths(std::span<const Utterance> data, Index max_frames) {
  if (data.empty()) throw Error(Errc::generic, "make_batches: empty dataset");
  for (const auto& u : data)
    if (u.frames() > max_frames)
      throw Error(Errc::generic, u.id + ": " + std::to_string(u.frames()) +
                                     " frames exceeds the maximum of " +
                                     std::to_string(max_frames));
}

/// Batches built one at a time so that only a single padded batch is alive.
template <typename F>
void for_each_batch(std::span<const Utterance> data, const TrainConfig& config,
                    std::optional<std::uint64_t> shuffle_seed,
                    double target_scale, F&& f) {
  check_lengths(data, config.max_frames);
  const auto order = utterance_order(data.size(), shuffle_seed);
  const auto B = static_cast<std::size_t>(config.batch_utterances);
  Index index = 0;
  for (std::size_t s = 0; s < order.size(); s += B) {
    std::vector<std::size_t> members(order.begin() + s,
                                     order.begin() + std::min(order.size(), s + B));
    f(index++, assemble_batch(data, std::move(members), config.max_frames,
                              target_scale));
  }
}

}  // namespace

std::vector<Batch> make_batches(std::span<const Utterance> utterances,
                                const TrainConfig& config,
                                std::optional<std::uint64_t> shuffle_seed,
                                double target_scale) {
  std::vector<Batch> out;
  for_each_batch(utterances, config, shuffle_seed, target_scale,
                 [&](Index, Batch b) { out.push_back(std::move(b)); });
  return out;
}

// ---------------------------------------------------------------------------
// Records

std::string TrainRecord::to_csv(bool with_seconds) const {
  std::string out = with_seconds ? "epoch,train_loss,val_loss,lr,seconds\n"
                                 : "epoch,train_loss,val_loss,lr\n";
  char buf[160];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g",
                  static_cast<long long>(e.epoch), e.train_loss, e.val_loss, e.lr);
    out += buf;
    if (with_seconds) {
      std::snprintf(buf, sizeof(buf), ",%.3f", e.seconds);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

double dataset_loss(const ModelWeights& w, std::span<const Utterance> data,
                    const TrainConfig& config) {
  double sum = 0.0;
  Index frames = 0;
  for_each_batch(data, config, std::nullopt, w.config.target_scale,
                 [&](Index, const Batch& full) {
                   const Batch b = full.cropped();
                   const Index n = b.loss_mask.count();
                   if (n == 0) return;
                   const auto preds = forward(w, b.features, b.mask, Mode::infer);
                   sum += double(n) * combined_loss<double>(preds, b.targets,
                                                            b.loss_mask,
                                                            config.loss_weights);
                   frames += n;
                 });
  if (frames == 0)
    throw Error(Errc::generic, "dataset has no frames with defined targets");
  return sum / double(frames);
}

MatrixX<double> predict_hz(const ModelWeights& w, const FeatureMatrix& features) {
  const Index T = features.frames();
  Tensor3<double> x(1, T, features.values.cols());
  x.data = features.values;
  const Mask mask(1, T, true);
  const auto preds = forward(w, x, mask, Mode::infer);
  MatrixX<double> out(T, 3);
  for (int k = 0; k < 3; ++k) out.col(k) = preds[k] * w.config.target_scale;
  return out;
}

MatrixX<double> predict_hz(const ModelWeights& w, const Utterance& utt) {
  return predict_hz(w, utt.features);
}

double dataset_mae_hz(const ModelWeights& w, std::span<const Utterance> data) {
  double sum = 0.0;
  Index count = 0;
  for (const auto& u : data) {
    const MatrixX<double> pred = predict_hz(w, u);
    const ArrayXb sel = loss_frames(u);
    for (Index t = 0; t < u.frames(); ++t) {
      if (!sel(t)) continue;
      sum += (pred.row(t) - u.targets_hz.row(t)).cwiseAbs().sum();
      count += 3;
    }
  }
  if (count == 0)
    throw Error(Errc::generic, "dataset has no frames with defined targets");
  return sum / double(count);
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(const ModelConfig& model_config, const TrainConfig& config,
                  std::span<const Utterance> train_set,
                  std::span<const Utterance> val_set, const TrainHooks& hooks) {
  model_config.validate();
  config.validate();
  if (train_set.empty()) throw Error(Errc::generic, "train: empty training set");
  if (val_set.empty()) throw Error(Errc::generic, "train: empty validation set");
  check_lengths(train_set, config.max_frames);
  check_lengths(val_set, config.max_frames);

  TrainResult result;
  ModelWeights w = build(model_config, stream_seed(config.seed, Stream::init));
  AdamState adam = AdamState::zeros_like(w);
  const std::uint64_t shuffle = stream_seed(config.seed, Stream::shuffle);
  const std::uint64_t dropout = stream_seed(config.seed, Stream::dropout);
  double best_val = std::numeric_limits<double>::infinity();
  result.best = w;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, config);
    double loss_sum = 0.0;
    Index loss_frames_total = 0;
    for_each_batch(
        train_set, config, mix_seed(shuffle, std::uint64_t(epoch)),
        model_config.target_scale, [&](Index bi, const Batch& full) {
          const Batch b = full.cropped();
          const Index n = b.loss_mask.count();
          if (n == 0) return;
          ForwardCache<double> cache;
          const std::uint64_t dseed =
              mix_seed(mix_seed(dropout, std::uint64_t(epoch)), std::uint64_t(bi));
          const auto preds = forward(w, b.features, b.mask, Mode::train, dseed, &cache);
          Predictions grads;
          const double loss = combined_loss<double>(preds, b.targets, b.loss_mask,
                                                    config.loss_weights, &grads);
          if (!std::isfinite(loss))
            throw Error(Errc::non_finite,
                        "non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(bi + 1),
                        ErrorKind::numerical);
          ModelWeights g = backward(w, cache, b.mask, grads);
          if (config.clip_norm > 0) {
            const double norm = gradient_norm(g);
            if (norm > config.clip_norm) {
              const double s = config.clip_norm / norm;
              for_each_tensor(g, [&](const std::string&, auto& t, bool) {
                t *= s;
              });
            }
          }
          try {
            adam_step(w, g, adam, lr, config);
          } catch (const Error& e) {
            throw Error(e.code(),
                        std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(bi + 1),
                        e.kind());
          }
          commit_batch_stats(w, cache);
          loss_sum += loss * double(n);
          loss_frames_total += n;
        });
    if (loss_frames_total == 0)
      throw Error(Errc::generic, "train: no frames with defined targets");

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / double(loss_frames_total);
    rec.val_loss = dataset_loss(w, val_set, config);
    if (!std::isfinite(rec.val_loss))
      throw Error(Errc::non_finite,
                  "non-finite validation loss at epoch " + std::to_string(epoch),
                  ErrorKind::numerical);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    result.record.epochs.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best = w;
      result.record.best_epoch = epoch;
      if (hooks.checkpoint) save(result.best, *hooks.checkpoint);
    }
    if (hooks.on_epoch && !hooks.on_epoch(rec, w, result.best)) break;
  }
  return result;
}

}  // namespace ftrack
