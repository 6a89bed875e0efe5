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

#ifndef SOTA_PIPELINE_HPP_
#define SOTA_PIPELINE_HPP_

#include <functional>

#include "sota/base_segmentor.hpp"
#include "sota/eval_report.hpp"
#include "sota/mask_decoder.hpp"
#include "sota/metrics.hpp"
#include "sota/morphology.hpp"
#include "sota/scene_prompt.hpp"
#include "sota/scene_synthesis.hpp"
#include "sota/semantic_fusion.hpp"

namespace sota {

enum class MergeMode { kAverage, kMax, kDecoderOnly };

inline std::string to_string(MergeMode m) {
  switch (m) {
    case MergeMode::kAverage: return "average";
    case MergeMode::kMax: return "max";
    default: return "decoder_only";
  }
}

struct BundleConfig {
  int num_classes = 6;
  int feature_dim = 64;  // D_I; also the prompt dim and decoder width
  int downsample = 4;
  NormKind normalization = NormKind::kSigmoid;
  MergeMode merge_mode = MergeMode::kAverage;
  MorphologyConfig morphology;  // applied to the extracted road mask
  FusionMode fusion = FusionMode::kGated;
  int decoder_prompt_tokens = 8;
  int decoder_blocks = 2;

  void validate() const;
};

/// Every component of the prediction path plus the composition choices.
/// Dimensional consistency is validated at construction/load, not per call.
struct PipelineBundle {
  BundleConfig config;
  BaseSegmentor<float> base;
  TinyEncoder<float> encoder;
  ProjectionBlock<float> project;
  AlignmentLayer<float> align;
  FusionBlock<float> fuse;
  CrossAttention<float> attention;
  MaskDecoder<float> decoder;
  bool lora_wrapped = false;
  LoraConfig lora;
  std::int64_t train_step = 0;

  static PipelineBundle create(const BundleConfig& cfg, std::uint64_t seed);

  void save(const std::filesystem::path& dir, const std::string& config_hash) const;
  static PipelineBundle load(const std::filesystem::path& dir);
};

/// Final-map merge of decoder probability with the base anomaly score.
/// average and max are monotone non-decreasing in both arguments.
inline float merge_scores(float decoder_prob, float anomaly_value, MergeMode mode) {
  switch (mode) {
    case MergeMode::kAverage: return 0.5f * (decoder_prob + anomaly_value);
    case MergeMode::kMax: return std::max(decoder_prob, anomaly_value);
    default: return decoder_prob;
  }
}

struct PredictOutputs {
  Tensor<float> final_map;      // [H,W] merged score in [0,1]
  Tensor<float> decoder_prob;   // [H,W] logistic(decoder logits)
  AnomalyMap anomaly;           // base OOD confidence (values + raw)
  MaskU8 road_mask;             // argmax road prior
  MaskU8 road_mask_refined;     // after morphology
  Tensor<float> gated;          // [H,W] anomaly restricted to refined road
  Tensor<float> gate_map;       // [H',W'] fusion gate M
  Tensor<float> attention;      // [d,d] prompt attention A
};

PredictOutputs predict(const Tensor<float>& image, const PipelineBundle& bundle);

enum class ScoreSource { kFullPipeline, kRawAnomaly };

/// Generic dataset evaluation over arbitrary per-sample score maps. Samples
/// are scored in parallel; accumulation folds in index order, so reports are
/// independent of both thread count and dataset ordering.
using ScoreFn = std::function<Tensor<float>(const SceneSample&, std::int64_t)>;
EvalReport evaluate_scores(const Dataset& dataset, const ComponentEvalConfig& cfg,
                           const ScoreFn& score_fn);

EvalReport batch_evaluate(const Dataset& dataset, const PipelineBundle& bundle,
                          const ComponentEvalConfig& cfg,
                          ScoreSource source = ScoreSource::kFullPipeline);

}  // namespace sota

#endif  // SOTA_PIPELINE_HPP_
