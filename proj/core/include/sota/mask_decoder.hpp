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

#ifndef SOTA_MASK_DECODER_HPP_
#define SOTA_MASK_DECODER_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "sota/nn.hpp"

namespace sota {

enum class LoraTarget { kCrossAttention, kSelfAttention, kMlp };

struct LoraConfig {
  int rank = 4;
  double alpha = 8.0;  // scaling = alpha / rank
  std::vector<LoraTarget> targets = {LoraTarget::kCrossAttention, LoraTarget::kMlp};

  bool has(LoraTarget t) const {
    for (auto x : targets)
      if (x == t) return true;
    return false;
  }
  void validate() const {
    if (rank < 1) throw ConfigError("lora: rank must be >= 1");
    if (targets.empty()) throw ConfigError("lora: targets must be nonempty");
  }
};

struct DecoderConfig {
  int dim = 64;  // model width; must equal the prompt embedding dim
  int num_prompt_tokens = 8;
  int num_blocks = 2;
  int mlp_hidden_mult = 2;

  void validate() const {
    if (dim < 4 || dim % 4 != 0) throw ConfigError("decoder: dim must be a multiple of 4");
    if (num_prompt_tokens < 1) throw ConfigError("decoder: need at least one prompt token");
    if (num_blocks < 1) throw ConfigError("decoder: need at least one block");
  }
};

/// Single-head attention sublayer with q/k/v/out projections.
template <typename T>
class AttentionSublayer {
 public:
  AttentionSublayer() = default;
  AttentionSublayer(int dim, Rng& rng)
      : dim_(dim), q_(dim, dim, rng), k_(dim, dim, rng), v_(dim, dim, rng), out_(dim, dim, rng) {}

  ag::Var<T> forward(const ag::Var<T>& queries, const ag::Var<T>& keys_values) const {
    auto q = q_.forward(queries);
    auto k = k_.forward(keys_values);
    auto v = v_.forward(keys_values);
    auto a = ag::softmax_rows(ag::scale(ag::matmul(q, ag::transpose(k)),
                                        static_cast<T>(1.0 / std::sqrt((double)dim_))));
    return out_.forward(ag::matmul(a, v));
  }

  template <typename F>
  void for_each_linear(F&& f) {
    f(q_);
    f(k_);
    f(v_);
    f(out_);
  }
  template <typename F>
  void for_each_linear(F&& f) const {
    f(q_);
    f(k_);
    f(v_);
    f(out_);
  }

  void collect(nn::ParamSet<T>& ps, const std::string& p) const {
    q_.collect(ps, p + ".q");
    k_.collect(ps, p + ".k");
    v_.collect(ps, p + ".v");
    out_.collect(ps, p + ".out");
  }
  void collect_adapters(nn::ParamSet<T>& ps, const std::string& p) const {
    q_.collect_adapter(ps, p + ".q");
    k_.collect_adapter(ps, p + ".k");
    v_.collect_adapter(ps, p + ".v");
    out_.collect_adapter(ps, p + ".out");
  }

 private:
  int dim_ = 0;
  nn::Linear<T> q_, k_, v_, out_;
};

/// Two-way block: token self-attention, token->image cross-attention, token
/// MLP, then image->token cross-attention; post-norm residuals throughout.
template <typename T>
struct TwoWayBlock {
  AttentionSublayer<T> self_attn, token_to_image, image_to_token;
  nn::Linear<T> mlp1, mlp2;
  nn::LayerNorm<T> ln_self, ln_cross, ln_mlp, ln_image;

  TwoWayBlock() = default;
  TwoWayBlock(int dim, int hidden, Rng& rng)
      : self_attn(dim, rng),
        token_to_image(dim, rng),
        image_to_token(dim, rng),
        mlp1(dim, hidden, rng),
        mlp2(hidden, dim, rng),
        ln_self(dim),
        ln_cross(dim),
        ln_mlp(dim),
        ln_image(dim) {}

  void collect(nn::ParamSet<T>& ps, const std::string& p) const {
    self_attn.collect(ps, p + ".sa");
    token_to_image.collect(ps, p + ".ca_t2i");
    image_to_token.collect(ps, p + ".ca_i2t");
    mlp1.collect(ps, p + ".mlp1");
    mlp2.collect(ps, p + ".mlp2");
    ln_self.collect(ps, p + ".ln_self");
    ln_cross.collect(ps, p + ".ln_cross");
    ln_mlp.collect(ps, p + ".ln_mlp");
    ln_image.collect(ps, p + ".ln_image");
  }
  void collect_adapters(nn::ParamSet<T>& ps, const std::string& p) const {
    self_attn.collect_adapters(ps, p + ".sa");
    token_to_image.collect_adapters(ps, p + ".ca_t2i");
    image_to_token.collect_adapters(ps, p + ".ca_i2t");
    mlp1.collect_adapter(ps, p + ".mlp1");
    mlp2.collect_adapter(ps, p + ".mlp2");
  }
};

/// Promptable mask decoder: one learned output token plus pooled prompt
/// tokens attend to the fused feature map through two-way blocks; mask
/// logits are the dot product of the transformed output token with the
/// upsampled per-pixel features.
template <typename T>
class MaskDecoder {
 public:
  MaskDecoder() = default;
  MaskDecoder(const DecoderConfig& cfg, Rng rng) : cfg_(cfg) {
    cfg.validate();
    const int d = cfg.dim;
    output_token_ = nn::make_param(
        Tensor<T>::randn({1, d}, rng, static_cast<T>(1.0 / std::sqrt((double)d))));
    for (int b = 0; b < cfg.num_blocks; ++b)
      blocks_.emplace_back(d, d * cfg.mlp_hidden_mult, rng);
    up1_ = nn::ConvTranspose2dLayer<T>(d, d / 2, 2, 2, rng);
    up2_ = nn::ConvTranspose2dLayer<T>(d / 2, d / 4, 2, 2, rng);
    head1_ = nn::Linear<T>(d, d, rng);
    head2_ = nn::Linear<T>(d, d / 4, rng);
  }

  /// fused: [d,H',W'], prompt: [d,N]; logits resized to out_h x out_w.
  ag::Var<T> decode(const ag::Var<T>& fused, const ag::Var<T>& prompt, int out_h,
                    int out_w) const {
    const int d = cfg_.dim;
    if (fused->value.rank() != 3 || fused->value.dim(0) != d)
      throw ShapeError("decode: fused features must be [dim,H',W']");
    if (prompt->value.rank() != 2 || prompt->value.dim(0) != d)
      throw ShapeError("decode: prompt must be [dim,N] with dim == decoder width");
    const int hp = fused->value.dim(1), wp = fused->value.dim(2);

    auto tokens = ag::concat_rows(output_token_, ag::pooled_tokens(prompt, cfg_.num_prompt_tokens));
    auto image = ag::transpose(ag::reshape(fused, {d, hp * wp}));  // [N', d]
    for (const auto& blk : blocks_) {
      tokens = blk.ln_self.forward_rows(ag::add(tokens, blk.self_attn.forward(tokens, tokens)));
      tokens = blk.ln_cross.forward_rows(
          ag::add(tokens, blk.token_to_image.forward(tokens, image)));
      auto hidden = blk.mlp2.forward(ag::gelu(blk.mlp1.forward(tokens)));
      tokens = blk.ln_mlp.forward_rows(ag::add(tokens, hidden));
      image = blk.ln_image.forward_rows(
          ag::add(image, blk.image_to_token.forward(image, tokens)));
    }
    auto feat = ag::reshape(ag::transpose(image), {d, hp, wp});
    auto upsampled = ag::gelu(up2_.forward(ag::gelu(up1_.forward(feat))));
    auto out_tok = head2_.forward(ag::gelu(head1_.forward(ag::slice_rows(tokens, 0, 1))));
    auto logits = ag::channel_dot(upsampled, ag::reshape(out_tok, {d / 4}));
    const int lh = logits->value.dim(0), lw = logits->value.dim(1);
    auto resized = ag::bilinear_resize(ag::reshape(logits, {1, lh, lw}), out_h, out_w);
    return ag::reshape(resized, {out_h, out_w});
  }

  void wrap_lora(const LoraConfig& cfg, Rng rng) {
    cfg.validate();
    const T scaling = static_cast<T>(cfg.alpha / cfg.rank);
    for (auto& blk : blocks_) {
      if (cfg.has(LoraTarget::kSelfAttention))
        blk.self_attn.for_each_linear(
            [&](nn::Linear<T>& l) { l.attach_adapter(cfg.rank, scaling, rng); });
      if (cfg.has(LoraTarget::kCrossAttention)) {
        blk.token_to_image.for_each_linear(
            [&](nn::Linear<T>& l) { l.attach_adapter(cfg.rank, scaling, rng); });
        blk.image_to_token.for_each_linear(
            [&](nn::Linear<T>& l) { l.attach_adapter(cfg.rank, scaling, rng); });
      }
      if (cfg.has(LoraTarget::kMlp)) {
        blk.mlp1.attach_adapter(cfg.rank, scaling, rng);
        blk.mlp2.attach_adapter(cfg.rank, scaling, rng);
      }
    }
    params().set_requires_grad(false);  // adapters stay trainable
  }

  void merge_lora() {
    if (!has_adapters()) throw ShapeError("merge_lora: no adapters present");
    for (auto& blk : blocks_) {
      auto merge_if = [](nn::Linear<T>& l) {
        if (l.has_adapter()) l.merge_adapter();
      };
      blk.self_attn.for_each_linear(merge_if);
      blk.token_to_image.for_each_linear(merge_if);
      blk.image_to_token.for_each_linear(merge_if);
      merge_if(blk.mlp1);
      merge_if(blk.mlp2);
    }
  }

  bool has_adapters() const {
    bool any = false;
    for (const auto& blk : blocks_) {
      blk.self_attn.for_each_linear([&](const nn::Linear<T>& l) { any |= l.has_adapter(); });
      blk.token_to_image.for_each_linear(
          [&](const nn::Linear<T>& l) { any |= l.has_adapter(); });
      blk.image_to_token.for_each_linear(
          [&](const nn::Linear<T>& l) { any |= l.has_adapter(); });
      any |= blk.mlp1.has_adapter() || blk.mlp2.has_adapter();
    }
    return any;
  }

  std::int64_t lora_param_count() const {
    std::int64_t n = 0;
    for (const auto& blk : blocks_) {
      blk.self_attn.for_each_linear(
          [&](const nn::Linear<T>& l) { n += l.adapter_param_count(); });
      blk.token_to_image.for_each_linear(
          [&](const nn::Linear<T>& l) { n += l.adapter_param_count(); });
      blk.image_to_token.for_each_linear(
          [&](const nn::Linear<T>& l) { n += l.adapter_param_count(); });
      n += blk.mlp1.adapter_param_count() + blk.mlp2.adapter_param_count();
    }
    return n;
  }

  nn::ParamSet<T> params() const {
    nn::ParamSet<T> ps;
    ps.add("output_token", output_token_);
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      blocks_[b].collect(ps, "block" + std::to_string(b));
    up1_.collect(ps, "up1");
    up2_.collect(ps, "up2");
    head1_.collect(ps, "head1");
    head2_.collect(ps, "head2");
    return ps;
  }

  nn::ParamSet<T> adapter_params() const {
    nn::ParamSet<T> ps;
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      blocks_[b].collect_adapters(ps, "block" + std::to_string(b));
    return ps;
  }

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  ag::Var<T> output_token_;
  std::vector<TwoWayBlock<T>> blocks_;
  nn::ConvTranspose2dLayer<T> up1_, up2_;
  nn::Linear<T> head1_, head2_;
};

}  // namespace sota

#endif  // SOTA_MASK_DECODER_HPP_
