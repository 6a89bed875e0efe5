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

#ifndef SOTA_BASE_SEGMENTOR_HPP_
#define SOTA_BASE_SEGMENTOR_HPP_

#include <array>
#include <string>

#include "sota/nn.hpp"
#include "sota/scene_synthesis.hpp"

namespace sota {

/// Normalization applied per class before summing inlier confidence.
enum class NormKind { kSigmoid, kTanh, kSoftmax };

inline std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::kSigmoid: return "sigmoid";
    case NormKind::kTanh: return "tanh";
    default: return "softmax";
  }
}

template <typename T>
struct AnomalyMapT {
  Tensor<T> values;      // [H,W] in [0,1], per-image min-max of raw_values
  Tensor<T> raw_values;  // [H,W] = 1 - sum_k norm(logit_k)
};
using AnomalyMap = AnomalyMapT<float>;

/// OOD confidence: raw(x) = 1 - sum_{k} norm(logits_k(x)); values is the
/// per-image min-max rescale of raw to [0,1], with constant maps mapping to
/// all-zeros. Min-max is monotone, so pixel rankings are unchanged.
template <typename T>
AnomalyMapT<T> ood_score(const Tensor<T>& logits, NormKind kind) {
  if (logits.rank() != 3) throw ShapeError("ood_score: logits must be [C,H,W]");
  if (!all_finite(logits)) throw ShapeError("ood_score: logits must be finite");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  AnomalyMapT<T> out;
  out.raw_values = Tensor<T>({h, w});
  for (std::int64_t i = 0; i < hw; ++i) {
    T acc = T(0);
    if (kind == NormKind::kSoftmax) {
      T mx = logits[i];
      for (int k = 1; k < c; ++k) mx = std::max(mx, logits[k * hw + i]);
      T denom = T(0);
      for (int k = 0; k < c; ++k) denom += std::exp(logits[k * hw + i] - mx);
      for (int k = 0; k < c; ++k) acc += std::exp(logits[k * hw + i] - mx) / denom;
    } else {
      for (int k = 0; k < c; ++k) {
        const T z = logits[k * hw + i];
        acc += kind == NormKind::kSigmoid
                   ? (z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                                : std::exp(z) / (T(1) + std::exp(z)))
                   : std::tanh(z);
      }
    }
    out.raw_values[i] = T(1) - acc;
  }
  const T lo = min_value(out.raw_values);
  const T hi = max_value(out.raw_values);
  out.values = Tensor<T>({h, w});
  if (hi > lo) {
    const T inv = T(1) / (hi - lo);
    for (std::int64_t i = 0; i < hw; ++i)
      out.values[i] = std::clamp((out.raw_values[i] - lo) * inv, T(0), T(1));
  }
  return out;
}

/// Tape version for end-to-end training when the base segmentor is not
/// frozen. Returns a [1,H,W] map; a constant raw map short-circuits to a
/// zero constant (matching the min-max convention, no gradient path).
template <typename T>
ag::Var<T> ood_score_graph(const ag::Var<T>& logits, NormKind kind) {
  const int c = logits->value.dim(0), h = logits->value.dim(1), w = logits->value.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  auto flat = ag::reshape(logits, {c, static_cast<int>(hw)});
  ag::Var<T> normed;
  switch (kind) {
    case NormKind::kSigmoid: normed = ag::sigmoid(flat); break;
    case NormKind::kTanh: normed = ag::tanh(flat); break;
    case NormKind::kSoftmax:
      normed = ag::transpose(ag::softmax_rows(ag::transpose(flat)));
      break;
  }
  auto ones = ag::constant(Tensor<T>::full({1, c}, T(1)));
  auto summed = ag::matmul(ones, normed);                    // [1, HW]
  auto raw = ag::add_scalar(ag::scale(summed, T(-1)), T(1));  // 1 - sum
  auto lo = ag::reduce_min(raw);
  auto hi = ag::reduce_max(raw);
  if (hi->value[0] <= lo->value[0]) return ag::constant(Tensor<T>({1, h, w}));
  auto values = ag::div_scalar_node(ag::sub_scalar_node(raw, lo), ag::sub(hi, lo));
  return ag::reshape(values, {1, h, w});
}

template <typename T>
struct SegmentorConfig {
  int in_channels = 3;
  int num_classes = 6;
  std::array<int, 5> widths = {16, 32, 48, 64, 96};
};

/// Closed-set encoder-decoder segmentor: four stride-2 stages down, skip
/// connections, mirrored transposed-conv decoder (~0.44M parameters at the
/// default widths). Input extents must be divisible by 16.
template <typename T>
class BaseSegmentor {
 public:
  BaseSegmentor() = default;
  BaseSegmentor(const SegmentorConfig<T>& cfg, Rng rng) : cfg_(cfg) {
    const auto& w = cfg.widths;
    stem_ = nn::Conv2dLayer<T>(cfg.in_channels, w[0], 3, 1, 1, rng);
    enc0_ = nn::Conv2dLayer<T>(w[0], w[0], 3, 1, 1, rng);
    down1_ = nn::Conv2dLayer<T>(w[0], w[1], 3, 2, 1, rng);
    enc1_ = nn::Conv2dLayer<T>(w[1], w[1], 3, 1, 1, rng);
    down2_ = nn::Conv2dLayer<T>(w[1], w[2], 3, 2, 1, rng);
    enc2_ = nn::Conv2dLayer<T>(w[2], w[2], 3, 1, 1, rng);
    down3_ = nn::Conv2dLayer<T>(w[2], w[3], 3, 2, 1, rng);
    enc3_ = nn::Conv2dLayer<T>(w[3], w[3], 3, 1, 1, rng);
    down4_ = nn::Conv2dLayer<T>(w[3], w[4], 3, 2, 1, rng);
    bott_ = nn::Conv2dLayer<T>(w[4], w[4], 3, 1, 1, rng);
    up4_ = nn::ConvTranspose2dLayer<T>(w[4], w[3], 2, 2, rng);
    dec3_ = nn::Conv2dLayer<T>(2 * w[3], w[3], 3, 1, 1, rng);
    up3_ = nn::ConvTranspose2dLayer<T>(w[3], w[2], 2, 2, rng);
    dec2_ = nn::Conv2dLayer<T>(2 * w[2], w[2], 3, 1, 1, rng);
    up2_ = nn::ConvTranspose2dLayer<T>(w[2], w[1], 2, 2, rng);
    dec1_ = nn::Conv2dLayer<T>(2 * w[1], w[1], 3, 1, 1, rng);
    up1_ = nn::ConvTranspose2dLayer<T>(w[1], w[0], 2, 2, rng);
    dec0_ = nn::Conv2dLayer<T>(2 * w[0], w[0], 3, 1, 1, rng);
    head_ = nn::Conv2dLayer<T>(w[0], cfg.num_classes, 1, 1, 0, rng);
  }

  ag::Var<T> forward(const ag::Var<T>& image) const {
    const int h = image->value.dim(1), w = image->value.dim(2);
    if (image->value.dim(0) != cfg_.in_channels)
      throw ShapeError("base segmentor: channel mismatch");
    if (h % 16 != 0 || w % 16 != 0)
      throw ShapeError("base segmentor: extents must be divisible by 16");
    using ag::concat_channels;
    using ag::gelu;
    auto a0 = gelu(enc0_.forward(gelu(stem_.forward(image))));
    auto a1 = gelu(enc1_.forward(gelu(down1_.forward(a0))));
    auto a2 = gelu(enc2_.forward(gelu(down2_.forward(a1))));
    auto a3 = gelu(enc3_.forward(gelu(down3_.forward(a2))));
    auto b = gelu(bott_.forward(gelu(down4_.forward(a3))));
    auto d3 = gelu(dec3_.forward(concat_channels(up4_.forward(b), a3)));
    auto d2 = gelu(dec2_.forward(concat_channels(up3_.forward(d3), a2)));
    auto d1 = gelu(dec1_.forward(concat_channels(up2_.forward(d2), a1)));
    auto d0 = gelu(dec0_.forward(concat_channels(up1_.forward(d1), a0)));
    return head_.forward(d0);
  }

  Tensor<T> forward_tensor(const Tensor<T>& image) const {
    return forward(ag::constant(image))->value;
  }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    stem_.collect(ps, "stem");
    enc0_.collect(ps, "enc0");
    down1_.collect(ps, "down1");
    enc1_.collect(ps, "enc1");
    down2_.collect(ps, "down2");
    enc2_.collect(ps, "enc2");
    down3_.collect(ps, "down3");
    enc3_.collect(ps, "enc3");
    down4_.collect(ps, "down4");
    bott_.collect(ps, "bott");
    up4_.collect(ps, "up4");
    dec3_.collect(ps, "dec3");
    up3_.collect(ps, "up3");
    dec2_.collect(ps, "dec2");
    up2_.collect(ps, "up2");
    dec1_.collect(ps, "dec1");
    up1_.collect(ps, "up1");
    dec0_.collect(ps, "dec0");
    head_.collect(ps, "head");
    return ps;
  }

  const SegmentorConfig<T>& config() const { return cfg_; }

 private:
  SegmentorConfig<T> cfg_;
  nn::Conv2dLayer<T> stem_, enc0_, down1_, enc1_, down2_, enc2_, down3_, enc3_, down4_, bott_;
  nn::ConvTranspose2dLayer<T> up4_, up3_, up2_, up1_;
  nn::Conv2dLayer<T> dec3_, dec2_, dec1_, dec0_, head_;
};

/// Deterministic test double: +margin at the ground-truth class, -margin
/// elsewhere; a confusion_rate fraction of inlier pixels gets the +margin
/// moved to a wrong class; OOD pixels get uniformly low logits.
template <typename T>
Tensor<T> oracle_segmentor(const SceneSample& sample, double confusion_rate, int num_classes,
                           std::uint64_t seed, T margin = T(10)) {
  if (confusion_rate < 0.0 || confusion_rate >= 1.0)
    throw ConfigError("oracle_segmentor: confusion_rate must be in [0,1)");
  const int h = sample.class_labels.dim(0), w = sample.class_labels.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  Tensor<T> logits({num_classes, h, w});
  Rng rng(seed);
  for (std::int64_t i = 0; i < hw; ++i) {
    if (sample.ood_mask[i]) {
      for (int k = 0; k < num_classes; ++k) logits[k * hw + i] = -margin;
      continue;
    }
    int cls = sample.class_labels[i];
    if (confusion_rate > 0.0 && rng.bernoulli(confusion_rate)) {
      const int offset = rng.uniform_int(1, num_classes - 1);
      cls = (cls + offset) % num_classes;
    }
    for (int k = 0; k < num_classes; ++k) logits[k * hw + i] = k == cls ? margin : -margin;
  }
  return logits;
}

}  // namespace sota

#endif  // SOTA_BASE_SEGMENTOR_HPP_
