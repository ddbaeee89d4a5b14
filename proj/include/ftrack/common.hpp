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

#ifndef FTRACK_COMMON_HPP
#define FTRACK_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ftrack {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using ArrayXb = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind {
  usage,      // bad arguments or configuration
  data,       // malformed or inconsistent input files
  numerical,  // non-finite values, non-convergence
};

/// Finer-grained codes so callers and tests can tell failures apart.
enum class Errc {
  generic,
  empty_signal,
  short_signal,
  degenerate_frame,
  bad_magic,
  version_mismatch,
  shape_mismatch,
  truncated,
  io,
  not_converged,
  non_finite,
  bad_argument,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what,
        ErrorKind kind = ErrorKind::data)
      : std::runtime_error(what), code_(code), kind_(kind) {}

  Errc code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  Errc code_;
  ErrorKind kind_;
};

/// splitmix64 step; used to derive labelled, independent seeds from one
/// user seed (init / dropout / shuffle / corpus streams).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw. Keeps
/// random streams identical across standard library implementations.
template <typename Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ftrack

#endif  // FTRACK_COMMON_HPP
