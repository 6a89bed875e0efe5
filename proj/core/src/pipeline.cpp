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

#include "sota/pipeline.hpp"

#include <fstream>

#include "json.hpp"
#include "sota/checkpoint.hpp"
#include "sota/threading.hpp"

namespace sota {

using nlohmann::json;

void BundleConfig::validate() const {
  if (num_classes < 2) throw ConfigError("bundle: num_classes must be >= 2");
  if (feature_dim < 4 || feature_dim % 4 != 0)
    throw ConfigError("bundle: feature_dim must be a positive multiple of 4");
  if (downsample < 2 || (downsample & (downsample - 1)) != 0)
    throw ConfigError("bundle: downsample must be a power of two >= 2");
  morphology.validate();
  if (decoder_prompt_tokens < 1) throw ConfigError("bundle: decoder_prompt_tokens >= 1");
  if (decoder_blocks < 1) throw ConfigError("bundle: decoder_blocks >= 1");
}

PipelineBundle PipelineBundle::create(const BundleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng root(seed);
  PipelineBundle b;
  b.config = cfg;
  SegmentorConfig<float> seg_cfg;
  seg_cfg.num_classes = cfg.num_classes;
  b.base = BaseSegmentor<float>(seg_cfg, root.split(1));
  b.encoder = TinyEncoder<float>(cfg.feature_dim, cfg.downsample, root.split(2));
  b.project = ProjectionBlock<float>(root.split(3));
  b.align = AlignmentLayer<float>(cfg.feature_dim, root.split(4));
  b.fuse = FusionBlock<float>(cfg.feature_dim, cfg.fusion, root.split(5));
  b.attention = CrossAttention<float>(cfg.feature_dim, root.split(6));
  DecoderConfig dec_cfg;
  dec_cfg.dim = cfg.feature_dim;
  dec_cfg.num_prompt_tokens = cfg.decoder_prompt_tokens;
  dec_cfg.num_blocks = cfg.decoder_blocks;
  b.decoder = MaskDecoder<float>(dec_cfg, root.split(7));
  return b;
}

PredictOutputs predict(const Tensor<float>& image, const PipelineBundle& bundle) {
  const int h = image.dim(1), w = image.dim(2);
  const auto& cfg = bundle.config;
  PredictOutputs out;

  // Base segmentor -> OOD confidence (Eq. 1 path).
  auto image_const = ag::constant(image);
  const Tensor<float> logits = bundle.base.forward(image_const)->value;
  out.anomaly = ood_score(logits, cfg.normalization);

  // Scene prompt: road prior, morphology, Hadamard gate, cross-attention.
  out.road_mask = extract_road_mask(logits);
  out.road_mask_refined = refine_mask(out.road_mask, cfg.morphology);
  out.gated = gate_anomaly(out.anomaly.values, out.road_mask_refined);

  auto anomaly_var = ag::constant(out.anomaly.values.reshaped({1, h, w}));
  auto gated_var = ag::constant(out.gated.reshaped({1, h, w}));
  const auto prompt = bundle.attention.forward(gated_var, anomaly_var, cfg.downsample);
  out.attention = prompt.attention->value;

  // Fusion: image features + aligned anomaly token.
  auto features = bundle.encoder.forward(image_const);
  auto aligned = bundle.align.forward(bundle.project.forward(anomaly_var));
  const auto fused = bundle.fuse.forward(features, aligned);
  out.gate_map = fused.gate->value.reshaped(
      {fused.gate->value.dim(1), fused.gate->value.dim(2)});

  // Decode and merge with the original confidence map.
  auto dec_logits = bundle.decoder.decode(fused.fused, prompt.embedding, h, w);
  out.decoder_prob = Tensor<float>({h, w});
  for (std::int64_t i = 0; i < out.decoder_prob.size(); ++i) {
    const float z = dec_logits->value[i];
    out.decoder_prob[i] = z >= 0 ? 1.0f / (1.0f + std::exp(-z))
                                 : std::exp(z) / (1.0f + std::exp(z));
  }
  out.final_map = Tensor<float>({h, w});
  for (std::int64_t i = 0; i < out.final_map.size(); ++i)
    out.final_map[i] =
        merge_scores(out.decoder_prob[i], out.anomaly.values[i], cfg.merge_mode);
  return out;
}

EvalReport evaluate_scores(const Dataset& dataset, const ComponentEvalConfig& cfg,
                           const ScoreFn& score_fn) {
  if (dataset.samples.empty()) throw MissingInputError("evaluate: dataset is empty");
  cfg.validate();
  const std::int64_t n = static_cast<std::int64_t>(dataset.samples.size());
  std::vector<Tensor<float>> maps(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t i) {
    maps[static_cast<std::size_t>(i)] =
        score_fn(dataset.samples[static_cast<std::size_t>(i)], i);
  });

  PixelMetricAccumulator pixels;
  ComponentTallies tallies;
  EvalReport report;
  report.tp_thresholds = cfg.tp_thresholds;
  const OodTargets targets = dataset.config.targets;
  for (std::int64_t i = 0; i < n; ++i) {
    const SceneSample& s = dataset.samples[static_cast<std::size_t>(i)];
    const MaskU8& gt = s.target_mask(targets);
    const Tensor<float>& score = maps[static_cast<std::size_t>(i)];
    if (score.size() != gt.size())
      throw ShapeError("evaluate: score map size mismatch at sample " + std::to_string(i));
    pixels.add_map(score, gt);
    ComponentTallies t = component_tallies(score, gt, cfg);
    EvalReport::PerImage per;
    per.index = i;
    per.gt_components = static_cast<int>(t.gt_sious.size());
    per.pred_components = static_cast<int>(t.pred_ppvs.size());
    per.tp = t.tp;
    per.fn = t.fn;
    per.fp = t.fp;
    report.per_image.push_back(std::move(per));
    tallies.merge(t);
  }

  report.auroc = pixels.auroc();
  report.auprc = pixels.auprc();
  report.fpr_at_95tpr = pixels.fpr_at_95();
  const ComponentMetrics cm = finalize_component_metrics(tallies, cfg);
  report.siou_mean = cm.siou_mean;
  report.ppv_mean = cm.ppv_mean;
  report.f1_star = cm.f1_star;
  report.f1_per_threshold = cm.f1_per_threshold;
  report.component_degenerate = cm.degenerate_empty;
  report.num_samples = n;
  report.num_pixels = pixels.size();
  return report;
}

EvalReport batch_evaluate(const Dataset& dataset, const PipelineBundle& bundle,
                          const ComponentEvalConfig& cfg, ScoreSource source) {
  return evaluate_scores(dataset, cfg, [&](const SceneSample& s, std::int64_t) {
    if (source == ScoreSource::kRawAnomaly) {
      const Tensor<float> logits = bundle.base.forward(ag::constant(s.image))->value;
      return ood_score(logits, bundle.config.normalization).values;
    }
    return predict(s.image, bundle).final_map;
  });
}

// ---------------------------------------------------------------------------
// Bundle persistence
// ---------------------------------------------------------------------------

namespace {

json bundle_config_to_json(const BundleConfig& c) {
  json j;
  j["num_classes"] = c.num_classes;
  j["feature_dim"] = c.feature_dim;
  j["downsample"] = c.downsample;
  j["normalization"] = to_string(c.normalization);
  j["merge_mode"] = to_string(c.merge_mode);
  j["morphology"] = {{"kernel_size", c.morphology.kernel_size},
                     {"iterations", c.morphology.iterations},
                     {"mode", c.morphology.mode == MorphMode::kErodeThenDilate
                                  ? "erode_then_dilate"
                                  : "dilate_only"}};
  j["fusion"] = to_string(c.fusion);
  j["decoder_prompt_tokens"] = c.decoder_prompt_tokens;
  j["decoder_blocks"] = c.decoder_blocks;
  return j;
}

NormKind norm_from_string(const std::string& s) {
  if (s == "sigmoid") return NormKind::kSigmoid;
  if (s == "tanh") return NormKind::kTanh;
  if (s == "softmax") return NormKind::kSoftmax;
  throw ConfigError("bundle: unknown normalization '" + s + "'");
}

MergeMode merge_from_string(const std::string& s) {
  if (s == "average") return MergeMode::kAverage;
  if (s == "max") return MergeMode::kMax;
  if (s == "decoder_only") return MergeMode::kDecoderOnly;
  throw ConfigError("bundle: unknown merge_mode '" + s + "'");
}

BundleConfig bundle_config_from_json(const json& j) {
  BundleConfig c;
  c.num_classes = j.at("num_classes").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.downsample = j.at("downsample").get<int>();
  c.normalization = norm_from_string(j.at("normalization").get<std::string>());
  c.merge_mode = merge_from_string(j.at("merge_mode").get<std::string>());
  const json& m = j.at("morphology");
  c.morphology.kernel_size = m.at("kernel_size").get<int>();
  c.morphology.iterations = m.at("iterations").get<int>();
  c.morphology.mode = m.at("mode").get<std::string>() == "dilate_only"
                          ? MorphMode::kDilateOnly
                          : MorphMode::kErodeThenDilate;
  c.fusion = j.at("fusion").get<std::string>() == "additive" ? FusionMode::kAdditive
                                                             : FusionMode::kGated;
  c.decoder_prompt_tokens = j.at("decoder_prompt_tokens").get<int>();
  c.decoder_blocks = j.at("decoder_blocks").get<int>();
  return c;
}

}  // namespace

void PipelineBundle::save(const std::filesystem::path& dir,
                          const std::string& config_hash) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("bundle: cannot create " + dir.string());

  json j;
  j["config"] = bundle_config_to_json(config);
  j["lora_wrapped"] = lora_wrapped;
  if (lora_wrapped) {
    std::vector<std::string> targets;
    for (auto t : lora.targets)
      targets.push_back(t == LoraTarget::kCrossAttention
                            ? "CA"
                            : (t == LoraTarget::kSelfAttention ? "SA" : "MLP"));
    j["lora"] = {{"rank", lora.rank}, {"alpha", lora.alpha}, {"targets", targets}};
  }
  j["train_step"] = train_step;
  std::ofstream out(dir / "bundle.json", std::ios::trunc);
  if (!out) throw IoError("bundle: cannot write " + (dir / "bundle.json").string());
  out << j.dump(2) << "\n";

  const nn::ParamSet<float> empty;
  CheckpointMeta meta;
  meta.step = train_step;
  meta.config_hash = config_hash;

  meta.component = "base_segmentor";
  save_checkpoint(dir / "base_segmentor", base.params(), empty, meta);
  meta.component = "tiny_encoder";
  save_checkpoint(dir / "tiny_encoder", encoder.params(), empty, meta);
  meta.component = "sfb";
  nn::ParamSet<float> sfb;
  sfb.extend("project", project.params());
  sfb.extend("align", align.params());
  sfb.extend("fuse", fuse.params());
  save_checkpoint(dir / "sfb", sfb, empty, meta);
  meta.component = "sgpca";
  save_checkpoint(dir / "sgpca", attention.params(), empty, meta);
  meta.component = "decoder";
  save_checkpoint(dir / "decoder", decoder.params(), decoder.adapter_params(), meta);
}

PipelineBundle PipelineBundle::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bundle.json");
  if (!in) throw MissingInputError("bundle: missing " + (dir / "bundle.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("bundle: malformed bundle.json: " + std::string(e.what()));
  }
  const BundleConfig cfg = bundle_config_from_json(j.at("config"));
  PipelineBundle b = PipelineBundle::create(cfg, /*seed=*/0);
  b.train_step = j.value("train_step", std::int64_t{0});
  b.lora_wrapped = j.value("lora_wrapped", false);
  if (b.lora_wrapped) {
    const json& lj = j.at("lora");
    b.lora.rank = lj.at("rank").get<int>();
    b.lora.alpha = lj.at("alpha").get<double>();
    b.lora.targets.clear();
    for (const auto& t : lj.at("targets")) {
      const std::string s = t.get<std::string>();
      if (s == "CA")
        b.lora.targets.push_back(LoraTarget::kCrossAttention);
      else if (s == "SA")
        b.lora.targets.push_back(LoraTarget::kSelfAttention);
      else if (s == "MLP")
        b.lora.targets.push_back(LoraTarget::kMlp);
      else
        throw ConfigError("bundle: unknown lora target '" + s + "'");
    }
    b.decoder.wrap_lora(b.lora, Rng(0));
  }

  const nn::ParamSet<float> empty;
  load_checkpoint(dir / "base_segmentor", b.base.params(), empty);
  load_checkpoint(dir / "tiny_encoder", b.encoder.params(), empty);
  nn::ParamSet<float> sfb;
  sfb.extend("project", b.project.params());
  sfb.extend("align", b.align.params());
  sfb.extend("fuse", b.fuse.params());
  load_checkpoint(dir / "sfb", sfb, empty);
  load_checkpoint(dir / "sgpca", b.attention.params(), empty);
  load_checkpoint(dir / "decoder", b.decoder.params(), b.decoder.adapter_params());
  return b;
}

}  // namespace sota
