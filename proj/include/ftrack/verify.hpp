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

// Finite-difference verification of every layer and of the whole network
// on a small configuration.

#ifndef FTRACK_VERIFY_HPP
#define FTRACK_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ftrack/model.hpp"

namespace ftrack {

struct LayerGradReport {
  std::string layer;
  bool linear = false;  // affine in its inputs and parameters
  double max_rel_error = 0.0;
  std::string worst;
  Index coordinates = 0;
};

struct GradSuiteOptions {
  Index batch = 2;
  Index time = 16;
  Index padded_frames = 5;  // trailing padding of the last sequence
  double h = 1e-5;
  std::uint64_t seed = 1;
};

/// Checks conv, batch norm, GLU, dropout, concat, dense layers, the loss and
/// the full network (all trainable tensors and the input) built from
/// `config`.
std::vector<LayerGradReport> gradcheck_suite(const ModelConfig& config,
                                             const GradSuiteOptions& options = {});

}  // namespace ftrack

#endif  // FTRACK_VERIFY_HPP
