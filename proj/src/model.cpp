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

#include "ftrack/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "config_util.hpp"
#include "ftrack/io.hpp"

namespace ftrack {

using detail::format_double;
using detail::parse_bool;
using detail::parse_index;
using detail::parse_real;
using detail::trim;

namespace {

constexpr char kModelMagic[8] = {'F', 'T', 'R', 'K', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw Error(Errc::bad_argument, "model config: " + m, ErrorKind::usage);
  };
  if (n_blocks < 1) fail("n_blocks must be >= 1");
  if (Index(dilations.size()) != n_blocks)
    fail("dilations must have n_blocks entries");
  for (Index d : dilations)
    if (d < 1) fail("dilations must be >= 1");
  if (channels < 1) fail("channels must be >= 1");
  if (kernel != kKernelSize) fail("only kernel = 3 is supported");
  if (head_width < 1) fail("head_width must be >= 1");
  if (input_dim < 1) fail("input_dim must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0, 1)");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must be in [0, 1)");
  if (!(target_scale > 0.0)) fail("target_scale must be > 0");
}

std::pair<Index, Index> ModelConfig::block_sources(Index i) const {
  if (include_input_in_dense) return {0, i};
  if (i == 1) return {0, 1};
  return {1, i - 1};
}

Index ModelConfig::block_input_channels(Index i) const {
  if (include_input_in_dense) return input_dim + (i - 1) * channels;
  return i == 1 ? input_dim : (i - 1) * channels;
}

std::pair<Index, Index> ModelConfig::head_sources() const {
  if (head_input == HeadInput::concat_all_blocks) return {1, n_blocks};
  return {n_blocks, 1};
}

Index ModelConfig::head_input_channels() const {
  return head_input == HeadInput::concat_all_blocks ? n_blocks * channels
                                                    : channels;
}

Index ModelConfig::receptive_radius() const {
  return (kernel - 1) / 2 *
         std::accumulate(dilations.begin(), dilations.end(), Index{0});
}

std::string ModelConfig::to_text() const {
  std::string d;
  for (std::size_t i = 0; i < dilations.size(); ++i)
    d += (i ? "," : "") + std::to_string(dilations[i]);
  std::string out;
  out += "n_blocks = " + std::to_string(n_blocks) + "\n";
  out += "dilations = " + d + "\n";
  out += "channels = " + std::to_string(channels) + "\n";
  out += "kernel = " + std::to_string(kernel) + "\n";
  out += "head_width = " + std::to_string(head_width) + "\n";
  out += "input_dim = " + std::to_string(input_dim) + "\n";
  out += "dropout_p = " + format_double(dropout_p) + "\n";
  out += "bn_momentum = " + format_double(bn_momentum) + "\n";
  out += std::string("include_input_in_dense = ") +
         (include_input_in_dense ? "true" : "false") + "\n";
  out += std::string("head_input = ") +
         (head_input == HeadInput::concat_all_blocks ? "concat_all_blocks"
                                                     : "last_block") +
         "\n";
  out += "target_scale = " + format_double(target_scale) + "\n";
  return out;
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "n_blocks") {
    n_blocks = parse_index(key, value);
  } else if (key == "dilations") {
    dilations.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) dilations.push_back(parse_index(key, trim(item)));
  } else if (key == "channels") {
    channels = parse_index(key, value);
  } else if (key == "kernel") {
    kernel = parse_index(key, value);
  } else if (key == "head_width") {
    head_width = parse_index(key, value);
  } else if (key == "input_dim") {
    input_dim = parse_index(key, value);
  } else if (key == "dropout_p") {
    dropout_p = parse_real(key, value);
  } else if (key == "bn_momentum") {
    bn_momentum = parse_real(key, value);
  } else if (key == "include_input_in_dense") {
    include_input_in_dense = parse_bool(key, value);
  } else if (key == "head_input") {
    if (value == "concat_all_blocks")
      head_input = HeadInput::concat_all_blocks;
    else if (value == "last_block")
      head_input = HeadInput::last_block;
    else
      throw Error(Errc::bad_argument,
                  "config: head_input must be concat_all_blocks or last_block",
                  ErrorKind::usage);
  } else if (key == "target_scale") {
    target_scale = parse_real(key, value);
  } else {
    return false;
  }
  return true;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::bad_argument, "config: expected key = value: " + line,
                  ErrorKind::usage);
    const std::string key = trim(line.substr(0, eq));
    if (!cfg.set(key, trim(line.substr(eq + 1))))
      throw Error(Errc::bad_argument, "config: unknown key '" + key + "'",
                  ErrorKind::usage);
  }
  cfg.validate();
  return cfg;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.channels = 4;
  cfg.head_width = 8;
  cfg.input_dim = 6;
  return cfg;
}

// ---------------------------------------------------------------------------
// Construction

ModelWeights zero_weights(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  w.config = config;
  const Index c = config.channels;
  w.blocks.resize(config.n_blocks);
  for (Index i = 1; i <= config.n_blocks; ++i) {
    auto& blk = w.blocks[i - 1];
    const Index cin = config.block_input_channels(i);
    blk.conv.weight = MatrixX<double>::Zero(kKernelSize * cin, c);
    blk.conv.bias = RowVectorX<double>::Zero(c);
    blk.bn.gamma = RowVectorX<double>::Zero(c);
    blk.bn.beta = RowVectorX<double>::Zero(c);
    blk.bn.running_mean = RowVectorX<double>::Zero(c);
    blk.bn.running_var = RowVectorX<double>::Zero(c);
    blk.glu.w = MatrixX<double>::Zero(c, c);
    blk.glu.v = MatrixX<double>::Zero(c, c);
    blk.glu.b = RowVectorX<double>::Zero(c);
    blk.glu.c = RowVectorX<double>::Zero(c);
  }
  for (auto& head : w.heads) {
    head.hidden.w = MatrixX<double>::Zero(config.head_input_channels(),
                                          config.head_width);
    head.hidden.b = RowVectorX<double>::Zero(config.head_width);
    head.out.w = MatrixX<double>::Zero(config.head_width, 1);
    head.out.b = RowVectorX<double>::Zero(1);
  }
  return w;
}

ModelWeights build(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = zero_weights(config);
  std::mt19937_64 rng(mix_seed(seed, 0x1417));
  auto glorot = [&](MatrixX<double>& m, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = (2.0 * uniform01(rng) - 1.0) * a;
  };
  for (auto& blk : w.blocks) {
    const double cin = double(blk.conv.in_channels());
    const double cout = double(blk.conv.out_channels());
    glorot(blk.conv.weight, cin * kKernelSize, cout * kKernelSize);
    blk.bn.gamma.setOnes();
    blk.bn.running_var.setOnes();
    glorot(blk.glu.w, cout, cout);
    glorot(blk.glu.v, cout, cout);
  }
  for (auto& head : w.heads) {
    glorot(head.hidden.w, double(head.hidden.w.rows()), double(head.hidden.w.cols()));
    glorot(head.out.w, double(head.out.w.rows()), double(head.out.w.cols()));
  }
  return w;
}

Index parameter_count(const ModelWeights& w, bool trainable_only) {
  Index n = 0;
  for_each_tensor(w, [&](const std::string&, const auto& t, bool trainable) {
    if (trainable || !trainable_only) n += t.size();
  });
  return n;
}

// ---------------------------------------------------------------------------
// Backward pass

ModelWeights backward(const ModelWeights& w, const ForwardCache<double>& cache,
                      const Mask& mask, const Predictions& d_preds,
                      Tensor3<double>* d_features) {
  const ModelConfig& cfg = w.config;
  ModelWeights g = zero_weights(cfg);
  const Index batch = cache.head_in.batch;
  const Index time = cache.head_in.time;

  std::vector<Tensor3<double>> dhs;
  dhs.reserve(cache.hs.size());
  for (const auto& h : cache.hs)
    dhs.push_back(Tensor3<double>::Zero(batch, time, h.channels()));

  auto scatter = [&](const Tensor3<double>& d, Index first, Index count) {
    Index off = 0;
    for (Index j = first; j < first + count; ++j) {
      const Index width = dhs[j].channels();
      dhs[j].data += d.data.middleCols(off, width);
      off += width;
    }
  };

  Tensor3<double> d_head_in = Tensor3<double>::Zero(batch, time, cache.head_in.channels());
  for (int k = 0; k < 3; ++k) {
    Tensor3<double> d_out(batch, time, 1);
    d_out.data.col(0) = d_preds[k];
    const Tensor3<double> d_hidden =
        dense_td_backward(cache.hidden[k], d_out, w.heads[k].out,
                          Activation::linear, cache.out_pre[k], g.heads[k].out);
    d_head_in.data += dense_td_backward(cache.head_in, d_hidden,
                                        w.heads[k].hidden, Activation::relu,
                                        cache.hidden_pre[k], g.heads[k].hidden)
                          .data;
  }
  {
    const auto [first, count] = cfg.head_sources();
    scatter(d_head_in, first, count);
  }

  for (Index i = cfg.n_blocks; i >= 1; --i) {
    const auto& blk = w.blocks[i - 1];
    const auto& bc = cache.blocks[i - 1];
    auto& gb = g.blocks[i - 1];
    Tensor3<double> dh = dhs[i];
    apply_mask(dh, mask);
    const Tensor3<double> d_gated = channel_dropout_backward(dh, bc.keep);
    const Tensor3<double> d_bn = glu_backward(bc.bn_out, d_gated, blk.glu, bc.glu, gb.glu);
    const Tensor3<double> d_conv =
        batch_norm_masked_backward(d_bn, mask, blk.bn, bc.bn, gb.bn);
    const Tensor3<double> d_in = dilated_conv1d_same_backward(
        bc.input, d_conv, blk.conv, cfg.dilations[i - 1], gb.conv);
    const auto [first, count] = cfg.block_sources(i);
    scatter(d_in, first, count);
  }
  for (auto& gb : g.blocks) {
    gb.bn.running_mean.setZero();
    gb.bn.running_var.setZero();
  }
  if (d_features) {
    *d_features = std::move(dhs[0]);
    apply_mask(*d_features, mask);
  }
  return g;
}

void commit_batch_stats(ModelWeights& w, const ForwardCache<double>& cache) {
  if (cache.mode != Mode::train) return;
  for (std::size_t i = 0; i < w.blocks.size(); ++i)
    update_running_stats(w.blocks[i].bn, cache.blocks[i].bn,
                         w.config.bn_momentum);
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const ModelWeights& w) {
  std::string header = w.config.to_text();
  std::uint64_t offset = 0;
  for_each_tensor(w, [&](const std::string& name, const auto& t, bool) {
    header += "tensor " + name + " " + std::to_string(t.rows()) + " " +
              std::to_string(t.cols()) + " " + std::to_string(offset) + "\n";
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
  });

  std::string out(kModelMagic, 8);
  const std::uint32_t version = kModelVersion;
  const std::uint64_t header_len = header.size();
  out.append(reinterpret_cast<const char*>(&version), sizeof(version));
  out.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out += header;
  for_each_tensor(w, [&](const std::string&, const auto& t, bool) {
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  });
  return out;
}

void save(const ModelWeights& w, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(w));
}

ModelWeights deserialize(const std::string& bytes, const std::string& origin,
                         const ModelConfig* expected) {
  if (bytes.size() < 8) throw Error(Errc::truncated, origin + ": truncated file");
  if (std::memcmp(bytes.data(), kModelMagic, 8) != 0)
    throw Error(Errc::bad_magic, origin + ": bad magic");
  if (bytes.size() < 20) throw Error(Errc::truncated, origin + ": truncated file");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 8, sizeof(version));
  std::memcpy(&header_len, bytes.data() + 12, sizeof(header_len));
  if (version != kModelVersion)
    throw Error(Errc::version_mismatch,
                origin + ": version mismatch (file " + std::to_string(version) +
                    ", supported " + std::to_string(kModelVersion) + ")");
  if (bytes.size() - 20 < header_len)
    throw Error(Errc::truncated, origin + ": truncated file");
  const std::string header = bytes.substr(20, header_len);
  const std::size_t data_start = 20 + header_len;

  struct Entry {
    Index rows, cols;
    std::uint64_t offset;
  };
  std::map<std::string, Entry> table;
  std::string config_text;
  std::stringstream ss(header);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("tensor ", 0) == 0) {
      std::stringstream ls(line.substr(7));
      std::string name;
      Entry e{};
      if (!(ls >> name >> e.rows >> e.cols >> e.offset))
        throw Error(Errc::truncated, origin + ": malformed tensor table");
      table[name] = e;
    } else {
      config_text += line + "\n";
    }
  }
  ModelConfig file_config;
  try {
    file_config = ModelConfig::from_text(config_text);
  } catch (const Error& e) {
    throw Error(Errc::truncated, origin + ": unreadable config header: " + e.what());
  }

  auto check_shapes = [&](const ModelWeights& ref, const char* against) {
    for_each_tensor(ref, [&](const std::string& name, const auto& t, bool) {
      const auto it = table.find(name);
      if (it == table.end())
        throw Error(Errc::shape_mismatch,
                    origin + ": shape mismatch: tensor '" + name + "' missing");
      if (it->second.rows != t.rows() || it->second.cols != t.cols())
        throw Error(Errc::shape_mismatch,
                    origin + ": shape mismatch for tensor '" + name + "': file " +
                        std::to_string(it->second.rows) + "x" +
                        std::to_string(it->second.cols) + ", " + against + " " +
                        std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    });
  };
  if (expected) check_shapes(zero_weights(*expected), "expected");
  ModelWeights w = zero_weights(file_config);
  check_shapes(w, "config implies");

  const std::size_t data_size = bytes.size() - data_start;
  for_each_tensor(w, [&](const std::string& name, auto& t, bool) {
    const Entry& e = table.at(name);
    const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(double);
    if (e.offset > data_size || data_size - e.offset < n)
      throw Error(Errc::truncated, origin + ": truncated file (tensor '" + name + "')");
    std::memcpy(t.data(), bytes.data() + data_start + e.offset, n);
  });
  return w;
}

ModelWeights load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path), path.string());
}

ModelWeights load(const std::filesystem::path& path, const ModelConfig& expected) {
  return deserialize(read_file_bytes(path), path.string(), &expected);
}

}  // namespace ftrack
