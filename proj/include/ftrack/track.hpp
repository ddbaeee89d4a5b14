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

#ifndef FTRACK_TRACK_HPP
#define FTRACK_TRACK_HPP

#include <array>
#include <string>
#include <vector>

namespace ftrack {

/// One frame of formant values. A formant of 0 Hz means "undefined".
struct FormantFrame {
  double time_s = 0.0;
  std::array<double, 3> hz{0.0, 0.0, 0.0};
  std::string phone = "sil";
  bool is_speech = false;

  bool defined(int k) const { return hz[k] > 0.0; }
  bool all_defined() const { return hz[0] > 0 && hz[1] > 0 && hz[2] > 0; }
};

struct FormantTrack {
  std::vector<FormantFrame> frames;

  std::size_t size() const { return frames.size(); }
};

}  // namespace ftrack

#endif  // FTRACK_TRACK_HPP
