// Copyright 2026 The SOTA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOTA_MORPHOLOGY_HPP_
#define SOTA_MORPHOLOGY_HPP_

#include "sota/tensor.hpp"

namespace sota {

enum class MorphMode { kErodeThenDilate, kDilateOnly };

struct MorphologyConfig {
  int kernel_size = 5;   // odd, all-ones structuring element
  int iterations = 2;
  MorphMode mode = MorphMode::kErodeThenDilate;

  void validate() const;
};

// Zero-padding semantics throughout: dilation sets a pixel when any kernel
// position holds a 1; erosion requires every kernel position to hold a 1, so
// pixels whose kernel window leaves the image are always eroded.
MaskU8 dilate(const MaskU8& mask, int kernel_size);
MaskU8 erode(const MaskU8& mask, int kernel_size);

/// kErodeThenDilate: n erosions then n dilations (opening when n == 1).
/// kDilateOnly: n dilations.
MaskU8 refine_mask(const MaskU8& mask, const MorphologyConfig& cfg);

}  // namespace sota

#endif  // SOTA_MORPHOLOGY_HPP_
