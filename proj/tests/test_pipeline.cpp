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

#include <cstring>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "sota/pipeline.hpp"
#include "sota/run_config.hpp"
#include "sota/training.hpp"

using namespace sota;
namespace fs = std::filesystem;

namespace {

SynthConfig toy_synth(std::uint64_t seed = 3) {
  SynthConfig c;
  c.height = c.width = 64;
  c.seed = seed;
  return c;
}

BundleConfig toy_bundle() {
  BundleConfig c;
  c.morphology.kernel_size = 3;
  c.morphology.iterations = 1;
  return c;
}

bool same_values(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::vector<Tensor<float>> snapshot(const nn::ParamSet<float>& ps) {
  std::vector<Tensor<float>> out;
  for (const auto& [_, v] : ps.items) out.push_back(v->value);
  return out;
}

bool equal_snapshots(const std::vector<Tensor<float>>& a, const nn::ParamSet<float>& ps) {
  std::size_t i = 0;
  for (const auto& [_, v] : ps.items)
    if (!same_values(a[i++], v->value)) return false;
  return true;
}

}  // namespace

TEST_CASE("predict: merge modes follow their definitions") {
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 7);
  const SceneSample s = synthesize_scene(toy_synth(), 1);

  bundle.config.merge_mode = MergeMode::kDecoderOnly;
  const PredictOutputs dec = predict(s.image, bundle);
  CHECK(same_values(dec.final_map, dec.decoder_prob));

  bundle.config.merge_mode = MergeMode::kAverage;
  const PredictOutputs avg = predict(s.image, bundle);
  for (std::int64_t i = 0; i < avg.final_map.size(); ++i)
    CHECK(avg.final_map[i] ==
          doctest::Approx(0.5f * (avg.decoder_prob[i] + avg.anomaly.values[i])));

  bundle.config.merge_mode = MergeMode::kMax;
  const PredictOutputs mx = predict(s.image, bundle);
  for (std::int64_t i = 0; i < mx.final_map.size(); ++i)
    CHECK(mx.final_map[i] == std::max(mx.decoder_prob[i], mx.anomaly.values[i]));
}

TEST_CASE("merge is monotone non-decreasing in both inputs for average and max") {
  Rng rng(71);
  for (MergeMode mode : {MergeMode::kAverage, MergeMode::kMax}) {
    for (int rep = 0; rep < 200; ++rep) {
      const float p = static_cast<float>(rng.uniform());
      const float y = static_cast<float>(rng.uniform());
      const float dp = static_cast<float>(rng.uniform(0.0, 1.0 - p));
      const float dy = static_cast<float>(rng.uniform(0.0, 1.0 - y));
      const float base = merge_scores(p, y, mode);
      CHECK(merge_scores(p + dp, y, mode) >= base);
      CHECK(merge_scores(p, y + dy, mode) >= base);
    }
  }
}

TEST_CASE("predict: decoder probabilities stay strictly inside (0,1)") {
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 77);
  const SceneSample s = synthesize_scene(toy_synth(), 9);
  const PredictOutputs out = predict(s.image, bundle);
  for (std::int64_t i = 0; i < out.decoder_prob.size(); ++i) {
    CHECK(out.decoder_prob[i] > 0.0f);
    CHECK(out.decoder_prob[i] < 1.0f);
  }
}

TEST_CASE("predict: deterministic and gating support holds at pipeline level") {
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 9);
  const SceneSample s = synthesize_scene(toy_synth(), 5);
  const PredictOutputs a = predict(s.image, bundle);
  const PredictOutputs b = predict(s.image, bundle);
  CHECK(same_values(a.final_map, b.final_map));

  // The gated map is exactly zero outside the refined road mask.
  for (std::int64_t i = 0; i < a.gated.size(); ++i)
    if (!a.road_mask_refined[i]) CHECK(a.gated[i] == 0.0f);
}

TEST_CASE("batch_evaluate: oracle-perfect scores give AuROC 1 and FPR 0") {
  const Dataset ds = synthesize_in_memory(toy_synth(21), 6);
  ComponentEvalConfig cfg;
  const EvalReport r = evaluate_scores(ds, cfg, [](const SceneSample& s, std::int64_t) {
    Tensor<float> m(s.ood_mask.shape());
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = s.ood_mask[i] ? 1.0f : 0.0f;
    return m;
  });
  CHECK(r.auroc == doctest::Approx(1.0));
  CHECK(r.fpr_at_95tpr == doctest::Approx(0.0));
  CHECK(r.auprc == doctest::Approx(1.0));
  CHECK(r.siou_mean == doctest::Approx(1.0));
  CHECK(r.f1_star == doctest::Approx(1.0));
}

TEST_CASE("batch_evaluate: single sample equals its own metrics; order invariant") {
  Dataset ds = synthesize_in_memory(toy_synth(22), 5);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 10);
  ComponentEvalConfig cfg;

  Dataset single;
  single.config = ds.config;
  single.samples.push_back(ds.samples[2]);
  const EvalReport one = batch_evaluate(single, bundle, cfg);
  CHECK(one.num_samples == 1);
  CHECK(one.per_image.size() == 1);

  const EvalReport fwd = batch_evaluate(ds, bundle, cfg);
  Dataset shuffled;
  shuffled.config = ds.config;
  for (int i : {4, 2, 0, 3, 1})
    shuffled.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
  const EvalReport rev = batch_evaluate(shuffled, bundle, cfg);
  CHECK(fwd.auroc == rev.auroc);
  CHECK(fwd.auprc == rev.auprc);
  CHECK(fwd.fpr_at_95tpr == rev.fpr_at_95tpr);
  CHECK(fwd.siou_mean == rev.siou_mean);
  CHECK(fwd.ppv_mean == rev.ppv_mean);
  CHECK(fwd.f1_star == rev.f1_star);
}

TEST_CASE("report f1_star is consistent with the per-image tallies") {
  const Dataset ds = synthesize_in_memory(toy_synth(25), 8);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 26);
  ComponentEvalConfig cfg;
  const EvalReport r = batch_evaluate(ds, bundle, cfg);
  REQUIRE_FALSE(r.per_image.empty());
  double f1_sum = 0;
  for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k) {
    int tp = 0, fn = 0, fp = 0;
    for (const auto& p : r.per_image) {
      tp += p.tp[k];
      fn += p.fn[k];
      fp += p.fp[k];
    }
    const int den = 2 * tp + fn + fp;
    f1_sum += den > 0 ? 2.0 * tp / den : 1.0;
  }
  CHECK(r.f1_star ==
        doctest::Approx(f1_sum / cfg.tp_thresholds.size()).epsilon(1e-12));
}

TEST_CASE("train_base: identical configs give identical loss curves") {
  const Dataset ds = synthesize_in_memory(toy_synth(58), 6);
  TrainBaseConfig cfg;
  cfg.max_iter = 12;
  cfg.batch_size = 2;
  SegmentorConfig<float> seg_cfg;
  BaseSegmentor<float> a(seg_cfg, Rng(59));
  BaseSegmentor<float> b(seg_cfg, Rng(59));
  const TrainCurve ca = train_base(ds, cfg, a);
  const TrainCurve cb = train_base(ds, cfg, b);
  REQUIRE(ca.loss.size() == cb.loss.size());
  for (std::size_t i = 0; i < ca.loss.size(); ++i) CHECK(ca.loss[i] == cb.loss[i]);
}

TEST_CASE("bundle save/load round-trips forward outputs bit-exactly") {
  const fs::path dir = fs::temp_directory_path() / "sota_bundle_rt";
  fs::remove_all(dir);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 33);
  // Wrap and perturb adapters so the round trip covers them too.
  bundle.lora = LoraConfig{};
  bundle.decoder.wrap_lora(bundle.lora, Rng(34));
  bundle.lora_wrapped = true;
  Rng rng(35);
  for (auto& [n, v] : bundle.decoder.adapter_params().items)
    for (std::int64_t i = 0; i < v->value.size(); ++i)
      v->value[i] += 0.02f * static_cast<float>(rng.normal());

  const SceneSample s = synthesize_scene(toy_synth(23), 2);
  const PredictOutputs before = predict(s.image, bundle);
  bundle.save(dir, "deadbeef");
  const PipelineBundle loaded = PipelineBundle::load(dir);
  const PredictOutputs after = predict(s.image, loaded);
  CHECK(same_values(before.final_map, after.final_map));
  CHECK(same_values(before.decoder_prob, after.decoder_prob));
  CHECK(same_values(before.attention, after.attention));
}

TEST_CASE("train_base: zero-iteration config keeps initialization") {
  const Dataset ds = synthesize_in_memory(toy_synth(40), 4);
  SegmentorConfig<float> seg_cfg;
  BaseSegmentor<float> seg(seg_cfg, Rng(41));
  const auto before = snapshot(seg.params());
  TrainBaseConfig cfg;
  cfg.max_iter = 1;
  cfg.batch_size = 1;
  // One step moves parameters...
  train_base(ds, cfg, seg);
  CHECK_FALSE(equal_snapshots(before, seg.params()));

  // ...while a fresh model observed before any step matches initialization.
  BaseSegmentor<float> seg2(seg_cfg, Rng(41));
  CHECK(equal_snapshots(before, seg2.params()));
}

TEST_CASE("train_base: smoothed loss decreases over a short run") {
  const Dataset ds = synthesize_in_memory(toy_synth(42), 16);
  SegmentorConfig<float> seg_cfg;
  BaseSegmentor<float> seg(seg_cfg, Rng(43));
  TrainBaseConfig cfg;
  cfg.max_iter = 80;
  cfg.batch_size = 2;
  const TrainCurve curve = train_base(ds, cfg, seg);
  REQUIRE(curve.loss.size() == 80);
  const double head = std::accumulate(curve.loss.begin(), curve.loss.begin() + 10, 0.0) / 10;
  const double tail = std::accumulate(curve.loss.end() - 10, curve.loss.end(), 0.0) / 10;
  CHECK(tail < head);
}

TEST_CASE("train_sota: freeze flags keep base and encoder bit-identical") {
  const Dataset ds = synthesize_in_memory(toy_synth(50), 6);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 51);
  const auto base_before = snapshot(bundle.base.params());
  const auto enc_before = snapshot(bundle.encoder.params());

  TrainSotaConfig cfg;
  cfg.max_iter = 8;
  cfg.batch_size = 1;
  cfg.encoder_pretrain = EncoderPretrain::kRandomFrozen;  // keep the encoder untouched
  train_sota(ds, cfg, bundle);
  CHECK(equal_snapshots(base_before, bundle.base.params()));
  CHECK(equal_snapshots(enc_before, bundle.encoder.params()));
  // The trainable parts moved.
  CHECK(bundle.train_step == 8);
}

TEST_CASE("train_sota: zero loss weights leave every parameter unchanged") {
  const Dataset ds = synthesize_in_memory(toy_synth(52), 4);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 53);
  TrainSotaConfig cfg;
  cfg.max_iter = 5;
  cfg.batch_size = 1;
  cfg.w_dice = 0.0;
  cfg.w_ce = 0.0;
  cfg.encoder_pretrain = EncoderPretrain::kRandomFrozen;
  const auto proj_before = snapshot(bundle.project.params());
  const auto attn_before = snapshot(bundle.attention.params());
  train_sota(ds, cfg, bundle);
  CHECK(equal_snapshots(proj_before, bundle.project.params()));
  CHECK(equal_snapshots(attn_before, bundle.attention.params()));
}

TEST_CASE("train_sota: identical configs give identical loss curves") {
  const Dataset ds = synthesize_in_memory(toy_synth(54), 6);
  TrainSotaConfig cfg;
  cfg.max_iter = 10;
  cfg.batch_size = 2;
  PipelineBundle a = PipelineBundle::create(toy_bundle(), 55);
  PipelineBundle b = PipelineBundle::create(toy_bundle(), 55);
  const TrainCurve ca = train_sota(ds, cfg, a);
  const TrainCurve cb = train_sota(ds, cfg, b);
  REQUIRE(ca.loss.size() == cb.loss.size());
  for (std::size_t i = 0; i < ca.loss.size(); ++i) CHECK(ca.loss[i] == cb.loss[i]);
}

TEST_CASE("train_sota: FFT mode trains decoder base weights") {
  const Dataset ds = synthesize_in_memory(toy_synth(56), 4);
  PipelineBundle bundle = PipelineBundle::create(toy_bundle(), 57);
  TrainSotaConfig cfg;
  cfg.max_iter = 4;
  cfg.batch_size = 1;
  cfg.use_lora = false;
  cfg.encoder_pretrain = EncoderPretrain::kRandomFrozen;
  const auto dec_before = snapshot(bundle.decoder.params());
  train_sota(ds, cfg, bundle);
  CHECK_FALSE(equal_snapshots(dec_before, bundle.decoder.params()));
  CHECK_FALSE(bundle.lora_wrapped);
}

TEST_CASE("run config: defaults round-trip through the resolved echo") {
  RunConfig cfg;
  cfg.finalize();
  const std::string echoed = cfg.resolved_json();
  const RunConfig back = RunConfig::from_json_string(echoed);
  CHECK(back.resolved_json() == echoed);
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("run config: unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(RunConfig::from_json_string(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_string(R"({"synth": {"nope": 2}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_string(R"({"model": {"normalization": "softplus"}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json_string(R"({"synth": {"ood_paste_probability": 1.7}})"),
      ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_string(R"({"eval": {"tp_thresholds": [0.5, 0.4]}})"),
                  ConfigError);
}

TEST_CASE("run config: paper-scale profile applies the appendix shapes") {
  RunConfig cfg;
  cfg.apply_paper_scale();
  CHECK(cfg.synth.height == 256);
  CHECK(cfg.bundle.feature_dim == 256);
  CHECK(cfg.bundle.morphology.kernel_size == 15);
  CHECK(cfg.bundle.morphology.iterations == 15);
}

TEST_CASE("run config: seed override cascades to sections without explicit seeds") {
  const RunConfig a = RunConfig::from_json_string(R"({"seed": 99})");
  CHECK(a.synth.seed == 99);
  CHECK(a.train_base.seed == 99);
  CHECK(a.train_sota.seed == 99);
  const RunConfig b = RunConfig::from_json_string(R"({"seed": 99, "synth": {"seed": 7}})");
  CHECK(b.synth.seed == 7);
  CHECK(b.train_base.seed == 99);
}
