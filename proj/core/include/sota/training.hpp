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

#ifndef SOTA_TRAINING_HPP_
#define SOTA_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "sota/errors.hpp"
#include "sota/eval_report.hpp"
#include "sota/pipeline.hpp"
#include "sota/scene_synthesis.hpp"

namespace sota {

/// Polynomial decay with exponent exactly 1: lr0 * (1 - iter/max_iter).
inline double poly_lr(std::int64_t iter, double lr0, std::int64_t max_iter) {
  if (max_iter < 1) throw ConfigError("poly_lr: max_iter must be >= 1");
  if (iter < 0 || iter > max_iter) throw ConfigError("poly_lr: iter out of range");
  return lr0 * (1.0 - static_cast<double>(iter) / static_cast<double>(max_iter));
}

struct TrainBaseConfig {
  double lr0 = 1e-3;
  std::int64_t max_iter = 1000;
  int batch_size = 4;
  std::uint64_t seed = 1;

  void validate() const {
    if (lr0 <= 0) throw ConfigError("train: lr0 must be > 0");
    if (max_iter < 1) throw ConfigError("train: max_iter must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  }
};

enum class EncoderPretrain { kRandomFrozen, kAutoencode };

struct TrainSotaConfig {
  double lr0 = 1e-4;
  std::int64_t max_iter = 2000;
  int batch_size = 4;
  std::uint64_t seed = 1;
  bool freeze_base = true;
  bool freeze_encoder = true;
  bool use_lora = true;  // false = full decoder fine-tune (FFT)
  double w_dice = 1.0;
  double w_ce = 1.0;
  std::int64_t eval_interval = 0;  // 0 disables periodic validation
  EncoderPretrain encoder_pretrain = EncoderPretrain::kAutoencode;
  std::int64_t encoder_pretrain_iters = 200;

  void validate() const {
    if (lr0 <= 0) throw ConfigError("train: lr0 must be > 0");
    if (max_iter < 1) throw ConfigError("train: max_iter must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (w_dice < 0 || w_ce < 0) throw ConfigError("train: loss weights must be >= 0");
  }
};

struct TrainCurve {
  std::vector<float> loss;             // one entry per iteration
  std::vector<std::int64_t> eval_iters;
  std::vector<EvalReport> eval_reports;
};

/// Closed-set pretraining of the base segmentor: per-pixel cross-entropy with
/// OOD pixels excluded from the loss. Throws TrainingDiverged on non-finite
/// loss. Deterministic in cfg.seed.
TrainCurve train_base(const Dataset& dataset, const TrainBaseConfig& cfg,
                      BaseSegmentor<float>& segmentor);

/// End-to-end optimization of the fusion block, prompt projections, and the
/// decoder adapters (or the whole decoder in FFT mode) under the poly
/// schedule. Base segmentor and tiny encoder follow the freeze flags.
/// Periodic validation reports are produced when eval_interval > 0 and a
/// validation set is given.
TrainCurve train_sota(const Dataset& dataset, const TrainSotaConfig& cfg,
                      PipelineBundle& bundle, const Dataset* val_dataset = nullptr);

}  // namespace sota

#endif  // SOTA_TRAINING_HPP_
