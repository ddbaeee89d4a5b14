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

#ifndef FTRACK_TENSOR_HPP
#define FTRACK_TENSOR_HPP

#include <string>

#include "ftrack/common.hpp"

namespace ftrack {

/// Batch x time x channel activations stored as one (B*T) x C matrix, row
/// b*T + t. Pointwise layers act on `data` directly; temporal layers use
/// `sequence(b)` views.
template <typename Scalar>
struct Tensor3 {
  Index batch = 0;
  Index time = 0;
  MatrixX<Scalar> data;

  Tensor3() = default;
  Tensor3(Index b, Index t, Index c) : batch(b), time(t), data(b * t, c) {}

  static Tensor3 Zero(Index b, Index t, Index c) {
    Tensor3 x(b, t, c);
    x.data.setZero();
    return x;
  }

  Index channels() const { return data.cols(); }
  Index rows() const { return data.rows(); }

  auto sequence(Index b) { return data.middleRows(b * time, time); }
  auto sequence(Index b) const { return data.middleRows(b * time, time); }

  Scalar& operator()(Index b, Index t, Index c) { return data(b * time + t, c); }
  Scalar operator()(Index b, Index t, Index c) const {
    return data(b * time + t, c);
  }

  bool same_shape(const Tensor3& o) const {
    return batch == o.batch && time == o.time && channels() == o.channels();
  }

  template <typename Other>
  Tensor3<Other> cast() const {
    Tensor3<Other> out;
    out.batch = batch;
    out.time = time;
    out.data = data.template cast<Other>();
    return out;
  }
};

/// B x T validity flags in the same row order as Tensor3. Valid frames of
/// each sequence form a prefix; the rest is padding.
struct Mask {
  Index batch = 0;
  Index time = 0;
  ArrayXb valid;

  Mask() = default;
  Mask(Index b, Index t, bool value = true)
      : batch(b), time(t), valid(ArrayXb::Constant(b * t, value)) {}

  bool operator()(Index b, Index t) const { return valid(b * time + t); }
  Index count() const { return valid.count(); }

  template <typename Scalar>
  VectorX<Scalar> weights() const {
    return valid.cast<Scalar>().matrix();
  }
};

inline std::string shape_string(Index b, Index t, Index c) {
  return "(" + std::to_string(b) + "," + std::to_string(t) + "," +
         std::to_string(c) + ")";
}

template <typename Scalar>
std::string shape_string(const Tensor3<Scalar>& x) {
  return shape_string(x.batch, x.time, x.channels());
}

}  // namespace ftrack

#endif  // FTRACK_TENSOR_HPP
