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

#ifndef SOTA_VISUALIZE_HPP_
#define SOTA_VISUALIZE_HPP_

#include "sota/png_io.hpp"
#include "sota/tensor.hpp"

namespace sota {

/// Fixed five-anchor colormap (navy, blue, cyan, yellow, red) interpolated
/// linearly; t is clamped to [0,1]. t = 0.5 lands on the cyan-yellow
/// midpoint.
struct Rgb8 {
  std::uint8_t r, g, b;
};
Rgb8 score_color(float t);

/// Score map [H,W] -> RGB heatmap of the same extents.
ImageU8 render_heatmap(const Tensor<float>& score);

/// Alpha blend of the heatmap over the image (alpha weights the heatmap).
ImageU8 render_overlay(const ImageU8& image, const Tensor<float>& score, float alpha = 0.5f);

/// [3,H,W] float image in [0,1] -> 8-bit RGB.
ImageU8 tensor_to_image(const Tensor<float>& chw);

/// Horizontal concatenation; all panels must share height and channels.
ImageU8 hstack(const std::vector<ImageU8>& panels);

}  // namespace sota

#endif  // SOTA_VISUALIZE_HPP_
