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

#include "sota/visualize.hpp"

#include <algorithm>
#include <cmath>

#include "sota/errors.hpp"

namespace sota {
namespace {

struct Anchor {
  float t;
  float r, g, b;
};

// navy -> blue -> cyan -> yellow -> red
constexpr Anchor kAnchors[] = {
    {0.00f, 0.05f, 0.03f, 0.35f},
    {0.25f, 0.10f, 0.30f, 0.85f},
    {0.50f, 0.05f, 0.85f, 0.85f},
    {0.75f, 0.95f, 0.90f, 0.10f},
    {1.00f, 0.90f, 0.05f, 0.05f},
};

}  // namespace

Rgb8 score_color(float t) {
  t = std::clamp(t, 0.0f, 1.0f);
  int hi = 1;
  while (hi < 4 && kAnchors[hi].t < t) ++hi;
  const Anchor& a = kAnchors[hi - 1];
  const Anchor& b = kAnchors[hi];
  const float f = (t - a.t) / (b.t - a.t);
  auto q = [&](float x, float y) {
    return static_cast<std::uint8_t>(std::lround(255.0f * (x + f * (y - x))));
  };
  return {q(a.r, b.r), q(a.g, b.g), q(a.b, b.b)};
}

ImageU8 render_heatmap(const Tensor<float>& score) {
  if (score.rank() != 2) throw ShapeError("render_heatmap: score map must be [H,W]");
  ImageU8 img;
  img.height = score.dim(0);
  img.width = score.dim(1);
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(score.size()) * 3);
  for (std::int64_t i = 0; i < score.size(); ++i) {
    const Rgb8 c = score_color(score[i]);
    img.pixels[static_cast<std::size_t>(i) * 3 + 0] = c.r;
    img.pixels[static_cast<std::size_t>(i) * 3 + 1] = c.g;
    img.pixels[static_cast<std::size_t>(i) * 3 + 2] = c.b;
  }
  return img;
}

ImageU8 render_overlay(const ImageU8& image, const Tensor<float>& score, float alpha) {
  if (image.channels != 3) throw ShapeError("render_overlay: image must be RGB");
  if (score.dim(0) != image.height || score.dim(1) != image.width)
    throw ShapeError("render_overlay: score extents do not match the image");
  ImageU8 out = image;
  for (std::int64_t i = 0; i < score.size(); ++i) {
    const Rgb8 c = score_color(score[i]);
    const std::size_t o = static_cast<std::size_t>(i) * 3;
    out.pixels[o + 0] = static_cast<std::uint8_t>(
        std::lround((1 - alpha) * image.pixels[o + 0] + alpha * c.r));
    out.pixels[o + 1] = static_cast<std::uint8_t>(
        std::lround((1 - alpha) * image.pixels[o + 1] + alpha * c.g));
    out.pixels[o + 2] = static_cast<std::uint8_t>(
        std::lround((1 - alpha) * image.pixels[o + 2] + alpha * c.b));
  }
  return out;
}

ImageU8 tensor_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("tensor_to_image: expected [3,H,W]");
  ImageU8 img;
  img.height = chw.dim(1);
  img.width = chw.dim(2);
  img.channels = 3;
  const std::int64_t hw = static_cast<std::int64_t>(img.height) * img.width;
  img.pixels.resize(static_cast<std::size_t>(hw) * 3);
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      img.pixels[static_cast<std::size_t>(i) * 3 + c] = static_cast<std::uint8_t>(
          std::lround(std::clamp(chw[c * hw + i], 0.0f, 1.0f) * 255.0f));
  return img;
}

ImageU8 hstack(const std::vector<ImageU8>& panels) {
  if (panels.empty()) throw ShapeError("hstack: no panels");
  ImageU8 out;
  out.height = panels[0].height;
  out.channels = panels[0].channels;
  for (const auto& p : panels) {
    if (p.height != out.height || p.channels != out.channels)
      throw ShapeError("hstack: panel geometry mismatch");
    out.width += p.width;
  }
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  int x_off = 0;
  for (const auto& p : panels) {
    for (int y = 0; y < p.height; ++y) {
      const std::size_t src = static_cast<std::size_t>(y) * p.width * p.channels;
      const std::size_t dst =
          (static_cast<std::size_t>(y) * out.width + x_off) * out.channels;
      std::copy(p.pixels.begin() + src, p.pixels.begin() + src + p.width * p.channels,
                out.pixels.begin() + dst);
    }
    x_off += p.width;
  }
  return out;
}

}  // namespace sota
