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

#include "sota/run_config.hpp"

#include <fstream>

#include "json.hpp"
#include "json_util.hpp"
#include "sota/checkpoint.hpp"

namespace sota {

using detail::read_field;
using detail::reject_unknown_keys;
using nlohmann::json;

namespace {

std::string morph_mode_str(MorphMode m) {
  return m == MorphMode::kErodeThenDilate ? "erode_then_dilate" : "dilate_only";
}

std::string lora_target_str(LoraTarget t) {
  switch (t) {
    case LoraTarget::kCrossAttention: return "CA";
    case LoraTarget::kSelfAttention: return "SA";
    default: return "MLP";
  }
}

LoraTarget lora_target_from(const std::string& s) {
  if (s == "CA") return LoraTarget::kCrossAttention;
  if (s == "SA") return LoraTarget::kSelfAttention;
  if (s == "MLP") return LoraTarget::kMlp;
  throw ConfigError("config: lora.targets entries must be CA, SA, or MLP");
}

void parse_model(const json& j, RunConfig& c) {
  reject_unknown_keys(j,
                      {"feature_dim", "downsample", "normalization",
                       "decoder_prompt_tokens", "decoder_blocks"},
                      "model");
  read_field(j, "feature_dim", c.bundle.feature_dim);
  read_field(j, "downsample", c.bundle.downsample);
  if (j.contains("normalization")) {
    const std::string s = j.at("normalization").get<std::string>();
    if (s == "sigmoid")
      c.bundle.normalization = NormKind::kSigmoid;
    else if (s == "tanh")
      c.bundle.normalization = NormKind::kTanh;
    else if (s == "softmax")
      c.bundle.normalization = NormKind::kSoftmax;
    else
      throw ConfigError("config: model.normalization must be sigmoid|tanh|softmax");
  }
  read_field(j, "decoder_prompt_tokens", c.bundle.decoder_prompt_tokens);
  read_field(j, "decoder_blocks", c.bundle.decoder_blocks);
}

void parse_morphology(const json& j, MorphologyConfig& m) {
  reject_unknown_keys(j, {"kernel_size", "iterations", "mode"}, "morphology");
  read_field(j, "kernel_size", m.kernel_size);
  read_field(j, "iterations", m.iterations);
  if (j.contains("mode")) {
    const std::string s = j.at("mode").get<std::string>();
    if (s == "erode_then_dilate")
      m.mode = MorphMode::kErodeThenDilate;
    else if (s == "dilate_only")
      m.mode = MorphMode::kDilateOnly;
    else
      throw ConfigError("config: morphology.mode must be erode_then_dilate|dilate_only");
  }
}

void parse_lora(const json& j, RunConfig& c) {
  reject_unknown_keys(j, {"enabled", "rank", "alpha", "targets"}, "lora");
  read_field(j, "enabled", c.lora_enabled);
  read_field(j, "rank", c.lora.rank);
  read_field(j, "alpha", c.lora.alpha);
  if (j.contains("targets")) {
    c.lora.targets.clear();
    for (const auto& t : j.at("targets"))
      c.lora.targets.push_back(lora_target_from(t.get<std::string>()));
  }
}

void parse_train_base(const json& j, TrainBaseConfig& t) {
  reject_unknown_keys(j, {"lr0", "max_iter", "batch_size", "seed"}, "train_base");
  read_field(j, "lr0", t.lr0);
  read_field(j, "max_iter", t.max_iter);
  read_field(j, "batch_size", t.batch_size);
  read_field(j, "seed", t.seed);
}

void parse_train_sota(const json& j, TrainSotaConfig& t) {
  reject_unknown_keys(j,
                      {"lr0", "max_iter", "batch_size", "seed", "freeze_base",
                       "freeze_encoder", "w_dice", "w_ce", "eval_interval",
                       "encoder_pretrain", "encoder_pretrain_iters"},
                      "train_sota");
  read_field(j, "lr0", t.lr0);
  read_field(j, "max_iter", t.max_iter);
  read_field(j, "batch_size", t.batch_size);
  read_field(j, "seed", t.seed);
  read_field(j, "freeze_base", t.freeze_base);
  read_field(j, "freeze_encoder", t.freeze_encoder);
  read_field(j, "w_dice", t.w_dice);
  read_field(j, "w_ce", t.w_ce);
  read_field(j, "eval_interval", t.eval_interval);
  if (j.contains("encoder_pretrain")) {
    const std::string s = j.at("encoder_pretrain").get<std::string>();
    if (s == "autoencode")
      t.encoder_pretrain = EncoderPretrain::kAutoencode;
    else if (s == "random")
      t.encoder_pretrain = EncoderPretrain::kRandomFrozen;
    else
      throw ConfigError("config: train_sota.encoder_pretrain must be autoencode|random");
  }
  read_field(j, "encoder_pretrain_iters", t.encoder_pretrain_iters);
}

void parse_eval(const json& j, ComponentEvalConfig& e) {
  reject_unknown_keys(
      j, {"seg_threshold", "connectivity", "tp_thresholds", "min_component_size"}, "eval");
  read_field(j, "seg_threshold", e.seg_threshold);
  read_field(j, "connectivity", e.connectivity);
  if (j.contains("tp_thresholds"))
    e.tp_thresholds = j.at("tp_thresholds").get<std::vector<double>>();
  read_field(j, "min_component_size", e.min_component_size);
}

void parse_paths(const json& j, PathsConfig& p) {
  reject_unknown_keys(j, {"data", "out", "base_checkpoint", "bundle", "input"}, "paths");
  read_field(j, "data", p.data);
  read_field(j, "out", p.out);
  read_field(j, "base_checkpoint", p.base_checkpoint);
  read_field(j, "bundle", p.bundle);
  read_field(j, "input", p.input);
}

}  // namespace

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"seed", "synth", "model", "morphology", "fusion", "merge_mode",
                       "lora", "train_base", "train_sota", "eval", "paths"},
                      "");
  RunConfig c;
  read_field(j, "seed", c.seed);
  // Per-section seeds default to the top-level seed unless set explicitly.
  c.synth.seed = c.seed;
  c.train_base.seed = c.seed;
  c.train_sota.seed = c.seed;
  if (j.contains("synth")) c.synth = detail::synth_config_from_json(j.at("synth"));
  if (!j.contains("synth") || !j.at("synth").contains("seed")) c.synth.seed = c.seed;
  if (j.contains("model")) parse_model(j.at("model"), c);
  if (j.contains("morphology")) parse_morphology(j.at("morphology"), c.bundle.morphology);
  if (j.contains("fusion")) {
    const std::string s = j.at("fusion").get<std::string>();
    if (s == "sfb")
      c.bundle.fusion = FusionMode::kGated;
    else if (s == "additive")
      c.bundle.fusion = FusionMode::kAdditive;
    else
      throw ConfigError("config: fusion must be sfb|additive");
  }
  if (j.contains("merge_mode")) {
    const std::string s = j.at("merge_mode").get<std::string>();
    if (s == "average")
      c.bundle.merge_mode = MergeMode::kAverage;
    else if (s == "max")
      c.bundle.merge_mode = MergeMode::kMax;
    else if (s == "decoder_only")
      c.bundle.merge_mode = MergeMode::kDecoderOnly;
    else
      throw ConfigError("config: merge_mode must be average|max|decoder_only");
  }
  if (j.contains("lora")) parse_lora(j.at("lora"), c);
  if (j.contains("train_base")) {
    parse_train_base(j.at("train_base"), c.train_base);
    if (!j.at("train_base").contains("seed")) c.train_base.seed = c.seed;
  }
  if (j.contains("train_sota")) {
    parse_train_sota(j.at("train_sota"), c.train_sota);
    if (!j.at("train_sota").contains("seed")) c.train_sota.seed = c.seed;
  }
  if (j.contains("eval")) parse_eval(j.at("eval"), c.eval);
  if (j.contains("paths")) parse_paths(j.at("paths"), c.paths);
  c.finalize();
  return c;
}

RunConfig RunConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void RunConfig::finalize() {
  synth.downsample_factor = bundle.downsample;
  bundle.num_classes = synth.num_classes;
  train_sota.use_lora = lora_enabled;
  synth.validate();
  bundle.validate();
  lora.validate();
  train_base.validate();
  train_sota.validate();
  eval.validate();
}

void RunConfig::apply_paper_scale() {
  synth.height = 256;
  synth.width = 256;
  bundle.feature_dim = 256;
  bundle.morphology.kernel_size = 15;
  bundle.morphology.iterations = 15;
  finalize();
}

std::string RunConfig::resolved_json() const {
  json j;
  j["seed"] = seed;
  j["synth"] = detail::synth_config_to_json(synth);
  j["model"] = {{"feature_dim", bundle.feature_dim},
                {"downsample", bundle.downsample},
                {"normalization", to_string(bundle.normalization)},
                {"decoder_prompt_tokens", bundle.decoder_prompt_tokens},
                {"decoder_blocks", bundle.decoder_blocks}};
  j["morphology"] = {{"kernel_size", bundle.morphology.kernel_size},
                     {"iterations", bundle.morphology.iterations},
                     {"mode", morph_mode_str(bundle.morphology.mode)}};
  j["fusion"] = to_string(bundle.fusion);
  j["merge_mode"] = to_string(bundle.merge_mode);
  std::vector<std::string> targets;
  for (auto t : lora.targets) targets.push_back(lora_target_str(t));
  j["lora"] = {{"enabled", lora_enabled},
               {"rank", lora.rank},
               {"alpha", lora.alpha},
               {"targets", targets}};
  j["train_base"] = {{"lr0", train_base.lr0},
                     {"max_iter", train_base.max_iter},
                     {"batch_size", train_base.batch_size},
                     {"seed", train_base.seed}};
  j["train_sota"] = {
      {"lr0", train_sota.lr0},
      {"max_iter", train_sota.max_iter},
      {"batch_size", train_sota.batch_size},
      {"seed", train_sota.seed},
      {"freeze_base", train_sota.freeze_base},
      {"freeze_encoder", train_sota.freeze_encoder},
      {"w_dice", train_sota.w_dice},
      {"w_ce", train_sota.w_ce},
      {"eval_interval", train_sota.eval_interval},
      {"encoder_pretrain",
       train_sota.encoder_pretrain == EncoderPretrain::kAutoencode ? "autoencode" : "random"},
      {"encoder_pretrain_iters", train_sota.encoder_pretrain_iters}};
  j["eval"] = {{"seg_threshold", eval.seg_threshold},
               {"connectivity", eval.connectivity},
               {"tp_thresholds", eval.tp_thresholds},
               {"min_component_size", eval.min_component_size}};
  j["paths"] = {{"data", paths.data},
                {"out", paths.out},
                {"base_checkpoint", paths.base_checkpoint},
                {"bundle", paths.bundle},
                {"input", paths.input}};
  return j.dump(2) + "\n";
}

void RunConfig::echo_to(const std::filesystem::path& out_dir) const {
  std::ofstream out(out_dir / "config.resolved.json", std::ios::trunc | std::ios::binary);
  if (!out)
    throw IoError("config: cannot write " + (out_dir / "config.resolved.json").string());
  out << resolved_json();
}

std::string RunConfig::hash() const { return fnv1a_hex(resolved_json()); }

}  // namespace sota
