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

#include "sota/training.hpp"

#include <cmath>

#include "sota/threading.hpp"

namespace sota {
namespace {

using ag::Var;

bool grads_finite(const nn::ParamSet<float>& params) {
  for (const auto& [_, v] : params.items) {
    if (!v->requires_grad || v->grad.empty()) continue;
    if (!all_finite(v->grad)) return false;
  }
  return true;
}

Tensor<float> mask_to_float(const MaskU8& m) {
  Tensor<float> t(m.shape());
  for (std::int64_t i = 0; i < m.size(); ++i) t[i] = m[i] ? 1.0f : 0.0f;
  return t;
}

}  // namespace

TrainCurve train_base(const Dataset& dataset, const TrainBaseConfig& cfg,
                      BaseSegmentor<float>& segmentor) {
  cfg.validate();
  if (dataset.samples.empty()) throw MissingInputError("train_base: dataset is empty");
  const std::int64_t n = static_cast<std::int64_t>(dataset.samples.size());

  nn::ParamSet<float> params = segmentor.params();
  params.set_requires_grad(true);
  nn::Adam<float> opt(params);
  Rng rng(cfg.seed);
  TrainCurve curve;

  for (std::int64_t iter = 0; iter < cfg.max_iter; ++iter) {
    const float lr = static_cast<float>(poly_lr(iter, cfg.lr0, cfg.max_iter));
    opt.zero_grad();
    Var<float> loss;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SceneSample& s =
          dataset.samples[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
      auto logits = segmentor.forward(ag::constant(s.image));
      // OOD pixels never supervise the closed-set loss.
      MaskU8 keep(s.ood_mask.shape());
      for (std::int64_t i = 0; i < keep.size(); ++i) keep[i] = s.ood_mask[i] ? 0 : 1;
      auto l = ag::masked_softmax_ce(logits, s.class_labels, keep);
      loss = b == 0 ? l : ag::add(loss, l);
    }
    loss = ag::scale(loss, 1.0f / static_cast<float>(cfg.batch_size));
    const float loss_value = loss->value[0];
    if (!std::isfinite(loss_value))
      throw TrainingDiverged("train_base: non-finite loss at iteration " +
                             std::to_string(iter));
    ag::backward(loss);
    if (!grads_finite(params))
      throw TrainingDiverged("train_base: non-finite gradient at iteration " +
                             std::to_string(iter));
    opt.step(lr);
    curve.loss.push_back(loss_value);
  }
  return curve;
}

namespace {

// Mirror of the tiny encoder used only for the reconstruction pretrain pass.
struct ReconstructionHead {
  std::vector<nn::ConvTranspose2dLayer<float>> stages;

  ReconstructionHead(int feature_dim, int downsample, Rng rng) {
    int in_ch = feature_dim;
    for (int f = downsample; f > 1; f /= 2) {
      const int out_ch = f == 2 ? 3 : std::max(8, in_ch / 2);
      stages.emplace_back(in_ch, out_ch, 2, 2, rng);
      in_ch = out_ch;
    }
  }

  Var<float> forward(Var<float> x) const {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      x = stages[i].forward(x);
      if (i + 1 < stages.size()) x = ag::gelu(x);
    }
    return x;
  }

  nn::ParamSet<float> params() const {
    nn::ParamSet<float> ps;
    for (std::size_t i = 0; i < stages.size(); ++i)
      stages[i].collect(ps, "recon" + std::to_string(i));
    return ps;
  }
};

void pretrain_encoder(const Dataset& dataset, TinyEncoder<float>& encoder,
                      std::int64_t iters, std::uint64_t seed) {
  if (iters <= 0) return;
  Rng rng(seed);
  ReconstructionHead head(encoder.feature_dim(), encoder.downsample(), rng.split(1));
  nn::ParamSet<float> params = encoder.params();
  params.set_requires_grad(true);
  nn::ParamSet<float> all = params;
  all.extend("head", head.params());
  nn::Adam<float> opt(all);
  const std::int64_t n = static_cast<std::int64_t>(dataset.samples.size());
  for (std::int64_t iter = 0; iter < iters; ++iter) {
    opt.zero_grad();
    const SceneSample& s =
        dataset.samples[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))];
    auto image = ag::constant(s.image);
    auto recon = head.forward(encoder.forward(image));
    auto diff = ag::sub(recon, image);
    auto loss = ag::mean_all(ag::mul(diff, diff));
    if (!std::isfinite(loss->value[0]))
      throw TrainingDiverged("encoder pretrain: non-finite loss at iteration " +
                             std::to_string(iter));
    ag::backward(loss);
    opt.step(1e-3f);
  }
}

struct FrozenSample {
  Tensor<float> anomaly;   // [1,H,W]
  Tensor<float> features;  // [feature_dim,H',W']
  MaskU8 refined;
  bool ready = false;
};

}  // namespace

TrainCurve train_sota(const Dataset& dataset, const TrainSotaConfig& cfg,
                      PipelineBundle& bundle, const Dataset* val_dataset) {
  cfg.validate();
  if (dataset.samples.empty()) throw MissingInputError("train_sota: dataset is empty");
  const std::int64_t n = static_cast<std::int64_t>(dataset.samples.size());
  const auto& bc = bundle.config;

  // Tiny-encoder preparation: reconstruction pretrain or random-frozen.
  if (cfg.encoder_pretrain == EncoderPretrain::kAutoencode)
    pretrain_encoder(dataset, bundle.encoder, cfg.encoder_pretrain_iters,
                     Rng::mix(cfg.seed, 0xE1C0DE));

  if (cfg.use_lora && !bundle.lora_wrapped) {
    bundle.decoder.wrap_lora(bundle.lora, Rng(Rng::mix(cfg.seed, 0x10A4)));
    bundle.lora_wrapped = true;
  }

  bundle.base.params().set_requires_grad(!cfg.freeze_base);
  bundle.encoder.params().set_requires_grad(!cfg.freeze_encoder);

  nn::ParamSet<float> trainable;
  trainable.extend("project", bundle.project.params());
  trainable.extend("align", bundle.align.params());
  trainable.extend("fuse", bundle.fuse.params());
  trainable.extend("sgpca", bundle.attention.params());
  if (cfg.use_lora)
    trainable.extend("decoder", bundle.decoder.adapter_params());
  else
    trainable.extend("decoder", bundle.decoder.params());
  if (!cfg.freeze_base) trainable.extend("base", bundle.base.params());
  if (!cfg.freeze_encoder) trainable.extend("encoder", bundle.encoder.params());
  trainable.set_requires_grad(true);
  nn::Adam<float> opt(trainable);

  const bool cache_frozen = cfg.freeze_base && cfg.freeze_encoder;
  std::vector<FrozenSample> cache(cache_frozen ? static_cast<std::size_t>(n) : 0);
  auto frozen_view = [&](std::int64_t idx) -> const FrozenSample& {
    FrozenSample& slot = cache[static_cast<std::size_t>(idx)];
    if (!slot.ready) {
      const SceneSample& s = dataset.samples[static_cast<std::size_t>(idx)];
      const Tensor<float> logits = bundle.base.forward(ag::constant(s.image))->value;
      const AnomalyMap am = ood_score(logits, bc.normalization);
      slot.anomaly = am.values.reshaped({1, am.values.dim(0), am.values.dim(1)});
      slot.refined = refine_mask(extract_road_mask(logits), bc.morphology);
      slot.features = bundle.encoder.forward(ag::constant(s.image))->value;
      slot.ready = true;
    }
    return slot;
  };

  Rng rng(cfg.seed);
  TrainCurve curve;
  ComponentEvalConfig eval_cfg;

  for (std::int64_t iter = 0; iter < cfg.max_iter; ++iter) {
    const float lr = static_cast<float>(poly_lr(iter, cfg.lr0, cfg.max_iter));
    opt.zero_grad();
    Var<float> loss;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::int64_t idx =
          static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
      const SceneSample& s = dataset.samples[static_cast<std::size_t>(idx)];
      const int h = s.image.dim(1), w = s.image.dim(2);

      Var<float> anomaly_var, features_var;
      MaskU8 refined;
      if (cache_frozen) {
        const FrozenSample& fs = frozen_view(idx);
        anomaly_var = ag::constant(fs.anomaly);
        features_var = ag::constant(fs.features);
        refined = fs.refined;
      } else {
        auto image = ag::constant(s.image);
        auto logits = bundle.base.forward(image);
        anomaly_var = ood_score_graph(logits, bc.normalization);
        refined = refine_mask(extract_road_mask(logits->value), bc.morphology);
        features_var = bundle.encoder.forward(image);
      }

      auto gated_var = gate_anomaly_graph(anomaly_var, refined);
      const auto prompt = bundle.attention.forward(gated_var, anomaly_var, bc.downsample);
      auto aligned = bundle.align.forward(bundle.project.forward(anomaly_var));
      const auto fused = bundle.fuse.forward(features_var, aligned);
      auto dec_logits = bundle.decoder.decode(fused.fused, prompt.embedding, h, w);

      const Tensor<float> target = mask_to_float(s.target_mask(dataset.config.targets));
      Var<float> l = nullptr;
      if (cfg.w_dice > 0) {
        auto dice = ag::dice_loss(ag::sigmoid(dec_logits), target, 1e-6f);
        l = ag::scale(dice, static_cast<float>(cfg.w_dice));
      }
      if (cfg.w_ce > 0) {
        auto ce = ag::scale(ag::bce_with_logits(dec_logits, target),
                            static_cast<float>(cfg.w_ce));
        l = l ? ag::add(l, ce) : ce;
      }
      if (!l) l = ag::constant(Tensor<float>::from_vector({1}, {0.0f}));
      loss = b == 0 ? l : ag::add(loss, l);
    }
    loss = ag::scale(loss, 1.0f / static_cast<float>(cfg.batch_size));
    const float loss_value = loss->value[0];
    if (!std::isfinite(loss_value))
      throw TrainingDiverged("train_sota: non-finite loss at iteration " +
                             std::to_string(iter) + " (parameters hold the last good state)");
    ag::backward(loss);
    if (!grads_finite(trainable))
      throw TrainingDiverged("train_sota: non-finite gradient at iteration " +
                             std::to_string(iter) + " (parameters hold the last good state)");
    opt.step(lr);
    curve.loss.push_back(loss_value);
    bundle.train_step = iter + 1;

    if (cfg.eval_interval > 0 && val_dataset != nullptr &&
        ((iter + 1) % cfg.eval_interval == 0 || iter + 1 == cfg.max_iter)) {
      curve.eval_iters.push_back(iter + 1);
      curve.eval_reports.push_back(batch_evaluate(*val_dataset, bundle, eval_cfg));
    }
  }
  return curve;
}

}  // namespace sota
