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

#ifndef SOTA_SCENE_PROMPT_HPP_
#define SOTA_SCENE_PROMPT_HPP_

#include <cmath>

#include "sota/morphology.hpp"
#include "sota/nn.hpp"

namespace sota {

/// Road prior from class logits: 1 where the argmax class is road (index 0).
/// Ties break toward the lowest class index.
template <typename T>
MaskU8 extract_road_mask(const Tensor<T>& logits, int road_class = 0) {
  if (logits.rank() != 3) throw ShapeError("extract_road_mask: logits must be [C,H,W]");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  MaskU8 mask({h, w});
  for (std::int64_t i = 0; i < hw; ++i) {
    int best = 0;
    T best_v = logits[i];
    for (int k = 1; k < c; ++k) {
      const T v = logits[k * hw + i];
      if (v > best_v) {  // strict: ties keep the lower index
        best_v = v;
        best = k;
      }
    }
    mask[i] = best == road_class ? 1 : 0;
  }
  return mask;
}

/// Hadamard gating (plain tensors): anomaly scores restricted to the refined
/// road support.
template <typename T>
Tensor<T> gate_anomaly(const Tensor<T>& anomaly, const MaskU8& refined) {
  if (anomaly.size() != refined.size() || anomaly.rank() != 2)
    throw ShapeError("gate_anomaly: shape mismatch");
  Tensor<T> out = anomaly;
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (!refined[i]) out[i] = T(0);
  return out;
}

/// Tape version: multiplies a [1,H,W] anomaly map by a constant 0/1 mask.
template <typename T>
ag::Var<T> gate_anomaly_graph(const ag::Var<T>& anomaly, const MaskU8& refined) {
  const int h = anomaly->value.dim(1), w = anomaly->value.dim(2);
  if (static_cast<std::int64_t>(h) * w != refined.size())
    throw ShapeError("gate_anomaly: shape mismatch");
  Tensor<T> m({1, h, w});
  for (std::int64_t i = 0; i < refined.size(); ++i) m[i] = refined[i] ? T(1) : T(0);
  return ag::mul(anomaly, ag::constant(std::move(m)));
}

template <typename T>
struct PromptOutput {
  ag::Var<T> embedding;  // [d, N], N = H' * W'
  ag::Var<T> attention;  // [d, d], rows sum to 1
};

/// Road-wise cross-attention. Query comes from the gated map, key/value from
/// the raw anomaly map; both are area-averaged down to H'xW' first, then
/// lifted to d channels by 1x1 convs (biases zero-initialized). The d x d
/// attention matrix is row-softmaxed (each output channel mixes V rows
/// convexly) with the 1/sqrt(d) scale.
template <typename T>
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(int embed_dim, Rng rng)
      : dim_(embed_dim),
        fq_(1, embed_dim, 1, 1, 0, rng),
        fk_(1, embed_dim, 1, 1, 0, rng),
        fv_(1, embed_dim, 1, 1, 0, rng) {
    if (embed_dim < 1) throw ConfigError("cross_attention: embed_dim must be >= 1");
  }

  PromptOutput<T> forward(const ag::Var<T>& gated, const ag::Var<T>& anomaly,
                          int downsample) const {
    if (!gated->value.same_shape(anomaly->value))
      throw ShapeError("cross_attention: map shape mismatch");
    if (!all_finite(gated->value) || !all_finite(anomaly->value))
      throw ShapeError("cross_attention: non-finite input");
    auto q_in = downsample > 1 ? ag::avg_pool2d(gated, downsample) : gated;
    auto kv_in = downsample > 1 ? ag::avg_pool2d(anomaly, downsample) : anomaly;
    const int n = q_in->value.dim(1) * q_in->value.dim(2);
    auto q = ag::reshape(fq_.forward(q_in), {dim_, n});
    auto k = ag::reshape(fk_.forward(kv_in), {dim_, n});
    auto v = ag::reshape(fv_.forward(kv_in), {dim_, n});
    auto scores = ag::scale(ag::matmul(q, ag::transpose(k)),
                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(dim_))));
    PromptOutput<T> out;
    out.attention = ag::softmax_rows(scores);
    out.embedding = ag::matmul(out.attention, v);
    return out;
  }

  int dim() const { return dim_; }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    fq_.collect(ps, "fq");
    fk_.collect(ps, "fk");
    fv_.collect(ps, "fv");
    return ps;
  }

 private:
  int dim_ = 0;
  nn::Conv2dLayer<T> fq_, fk_, fv_;
};

}  // namespace sota

#endif  // SOTA_SCENE_PROMPT_HPP_
