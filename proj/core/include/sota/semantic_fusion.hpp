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

#ifndef SOTA_SEMANTIC_FUSION_HPP_
#define SOTA_SEMANTIC_FUSION_HPP_

#include <string>

#include "sota/nn.hpp"

namespace sota {

inline constexpr int kTokenDim = 16;          // projected token channels
inline constexpr int kProjectHiddenDim = 8;   // width between the two convs

/// Frozen image-feature extractor: log2(downsample) stride-2 convs widening
/// to feature_dim, then one refining conv. Frozen either right after random
/// init or after a reconstruction pretrain pass (see training).
template <typename T>
class TinyEncoder {
 public:
  TinyEncoder() = default;
  TinyEncoder(int feature_dim, int downsample, Rng rng)
      : feature_dim_(feature_dim), downsample_(downsample) {
    int stages = 0;
    for (int f = downsample; f > 1; f /= 2) {
      if (f % 2 != 0) throw ConfigError("tiny encoder: downsample must be a power of two");
      ++stages;
    }
    if (stages == 0) throw ConfigError("tiny encoder: downsample must be >= 2");
    int in_ch = 3;
    for (int s = 0; s < stages; ++s) {
      const int out_ch = std::max(8, feature_dim >> (stages - 1 - s));
      stages_.emplace_back(in_ch, out_ch, 3, 2, 1, rng);
      in_ch = out_ch;
    }
    refine_ = nn::Conv2dLayer<T>(in_ch, feature_dim, 3, 1, 1, rng);
  }

  ag::Var<T> forward(const ag::Var<T>& image) const {
    const int h = image->value.dim(1), w = image->value.dim(2);
    if (h % downsample_ != 0 || w % downsample_ != 0)
      throw ShapeError("tiny encoder: extents not divisible by downsample factor");
    ag::Var<T> x = image;
    for (const auto& conv : stages_) x = ag::gelu(conv.forward(x));
    return refine_.forward(x);
  }

  int feature_dim() const { return feature_dim_; }
  int downsample() const { return downsample_; }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    for (std::size_t i = 0; i < stages_.size(); ++i)
      stages_[i].collect(ps, "stage" + std::to_string(i));
    refine_.collect(ps, "refine");
    return ps;
  }

 private:
  int feature_dim_ = 0, downsample_ = 4;
  std::vector<nn::Conv2dLayer<T>> stages_;
  nn::Conv2dLayer<T> refine_;
};

/// Anomaly-map projection: two 2x2 stride-2 convs (1 -> 8 -> 16), each
/// followed by channel-wise layer norm and GELU. [1,H,W] -> [16,H/4,W/4].
template <typename T>
class ProjectionBlock {
 public:
  ProjectionBlock() = default;
  explicit ProjectionBlock(Rng rng)
      : conv1_(1, kProjectHiddenDim, 2, 2, 0, rng),
        conv2_(kProjectHiddenDim, kTokenDim, 2, 2, 0, rng),
        ln1_(kProjectHiddenDim),
        ln2_(kTokenDim) {}

  ag::Var<T> forward(const ag::Var<T>& anomaly) const {
    if (anomaly->value.rank() != 3 || anomaly->value.dim(0) != 1)
      throw ShapeError("project: input must be [1,H,W]");
    if (anomaly->value.dim(1) % 4 != 0 || anomaly->value.dim(2) % 4 != 0)
      throw ShapeError("project: extents must be divisible by 4");
    auto x = ag::gelu(ln1_.forward_channels(conv1_.forward(anomaly)));
    return ag::gelu(ln2_.forward_channels(conv2_.forward(x)));
  }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    conv1_.collect(ps, "conv1");
    ln1_.collect(ps, "ln1");
    conv2_.collect(ps, "conv2");
    ln2_.collect(ps, "ln2");
    return ps;
  }

 private:
  nn::Conv2dLayer<T> conv1_, conv2_;
  nn::LayerNorm<T> ln1_, ln2_;
};

/// Token alignment: a single 1x1 conv 16 -> feature_dim.
template <typename T>
class AlignmentLayer {
 public:
  AlignmentLayer() = default;
  AlignmentLayer(int feature_dim, Rng rng) : conv_(kTokenDim, feature_dim, 1, 1, 0, rng) {}

  ag::Var<T> forward(const ag::Var<T>& token) const {
    if (token->value.dim(0) != kTokenDim)
      throw ShapeError("align: expected " + std::to_string(kTokenDim) + " channels");
    return conv_.forward(token);
  }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    conv_.collect(ps, "conv");
    return ps;
  }

  ag::Var<T> weight() { return conv_.weight(); }
  ag::Var<T> bias() { return conv_.bias(); }

 private:
  nn::Conv2dLayer<T> conv_;
};

enum class FusionMode { kGated, kAdditive };

inline std::string to_string(FusionMode m) {
  return m == FusionMode::kGated ? "sfb" : "additive";
}

/// Gated residual fusion. kGated: M = sigmoid(conv3x3(concat(T_a, F_I)));
/// fused = (1+M) * F_I + (1-M) * T_a, M broadcast across channels. The gate
/// bias starts at zero so M begins near one half (balanced fusion).
/// kAdditive is the plain F_I + T_a baseline.
template <typename T>
class FusionBlock {
 public:
  struct Output {
    ag::Var<T> fused;  // [D_I, H', W']
    ag::Var<T> gate;   // [1, H', W'] in (0,1); all 0.5 placeholder in additive mode
  };

  FusionBlock() = default;
  FusionBlock(int feature_dim, FusionMode mode, Rng rng)
      : mode_(mode), gate_conv_(2 * feature_dim, 1, 3, 1, 1, rng) {}

  Output forward(const ag::Var<T>& image_features, const ag::Var<T>& aligned_token) const {
    if (!image_features->value.same_shape(aligned_token->value))
      throw ShapeError("fuse: feature/token shape mismatch");
    Output out;
    if (mode_ == FusionMode::kAdditive) {
      out.fused = ag::add(image_features, aligned_token);
      out.gate = ag::constant(
          Tensor<T>::full({1, image_features->value.dim(1), image_features->value.dim(2)},
                          T(0.5)));
      return out;
    }
    auto composite = ag::concat_channels(aligned_token, image_features);
    out.gate = ag::sigmoid(gate_conv_.forward(composite));
    auto amplified = ag::scale_by_map(image_features, ag::add_scalar(out.gate, T(1)));
    auto damped = ag::scale_by_map(aligned_token,
                                   ag::add_scalar(ag::scale(out.gate, T(-1)), T(1)));
    out.fused = ag::add(amplified, damped);
    return out;
  }

  FusionMode mode() const { return mode_; }
  ag::Var<T> gate_bias() { return gate_conv_.bias(); }
  ag::Var<T> gate_weight() { return gate_conv_.weight(); }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    gate_conv_.collect(ps, "gate_conv");
    return ps;
  }

 private:
  FusionMode mode_ = FusionMode::kGated;
  nn::Conv2dLayer<T> gate_conv_;
};

}  // namespace sota

#endif  // SOTA_SEMANTIC_FUSION_HPP_
