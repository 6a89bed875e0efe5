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

#ifndef SOTA_RUN_CONFIG_HPP_
#define SOTA_RUN_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "sota/mask_decoder.hpp"
#include "sota/metrics.hpp"
#include "sota/pipeline.hpp"
#include "sota/scene_synthesis.hpp"
#include "sota/training.hpp"

namespace sota {

struct PathsConfig {
  std::string data;
  std::string out;
  std::string base_checkpoint;
  std::string bundle;
  std::string input;
};

/// The whole run configuration: one UTF-8 JSON document with nested
/// sections. Unknown keys are rejected; every field has a documented default;
/// the resolved form (all fields explicit) is echoed into output directories.
struct RunConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  BundleConfig bundle;
  bool lora_enabled = true;
  LoraConfig lora;
  TrainBaseConfig train_base;
  TrainSotaConfig train_sota;
  ComponentEvalConfig eval;
  PathsConfig paths;

  static RunConfig from_json_string(const std::string& text);
  static RunConfig from_json_file(const std::filesystem::path& path);

  /// Full echo with every field explicit; re-loading it reproduces *this.
  std::string resolved_json() const;
  void echo_to(const std::filesystem::path& out_dir) const;
  std::string hash() const;

  /// Appendix-scale profile: 256x256 images, feature_dim 256, 15x15
  /// structuring element applied 15 times.
  void apply_paper_scale();

  /// Re-derives the coupled fields (class count, downsample, decoder width,
  /// per-section seeds) and validates everything.
  void finalize();
};

}  // namespace sota

#endif  // SOTA_RUN_CONFIG_HPP_
