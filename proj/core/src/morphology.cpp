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

#include "sota/morphology.hpp"

#include <algorithm>

#include "sota/errors.hpp"

namespace sota {
namespace {

// The all-ones box is separable: a horizontal min/max pass followed by a
// vertical one equals the full 2D filter, including the zero-padded border.
enum class Pass { kMin, kMax };

MaskU8 run_separable(const MaskU8& in, int k, Pass pass) {
  const int h = in.dim(0), w = in.dim(1);
  const int r = k / 2;
  constexpr std::uint8_t pad = 0;
  MaskU8 tmp({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t acc = pass == Pass::kMin ? 1 : 0;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = x + dx;
        const std::uint8_t v = (xx >= 0 && xx < w) ? in.at2(y, xx) : pad;
        if (pass == Pass::kMin)
          acc = std::min(acc, v);
        else
          acc = std::max(acc, v);
      }
      tmp.at2(y, x) = acc;
    }
  }
  MaskU8 out({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t acc = pass == Pass::kMin ? 1 : 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        const std::uint8_t v = (yy >= 0 && yy < h) ? tmp.at2(yy, x) : pad;
        if (pass == Pass::kMin)
          acc = std::min(acc, v);
        else
          acc = std::max(acc, v);
      }
      out.at2(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

void MorphologyConfig::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("morphology: kernel_size must be odd and >= 1");
  if (iterations < 0) throw ConfigError("morphology: iterations must be >= 0");
}

MaskU8 dilate(const MaskU8& mask, int kernel_size) {
  return run_separable(mask, kernel_size, Pass::kMax);
}

MaskU8 erode(const MaskU8& mask, int kernel_size) {
  return run_separable(mask, kernel_size, Pass::kMin);
}

MaskU8 refine_mask(const MaskU8& mask, const MorphologyConfig& cfg) {
  cfg.validate();
  MaskU8 out = mask;
  if (cfg.mode == MorphMode::kErodeThenDilate) {
    for (int i = 0; i < cfg.iterations; ++i) out = erode(out, cfg.kernel_size);
    for (int i = 0; i < cfg.iterations; ++i) out = dilate(out, cfg.kernel_size);
  } else {
    for (int i = 0; i < cfg.iterations; ++i) out = dilate(out, cfg.kernel_size);
  }
  return out;
}

}  // namespace sota
