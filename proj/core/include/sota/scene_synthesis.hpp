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

#ifndef SOTA_SCENE_SYNTHESIS_HPP_
#define SOTA_SCENE_SYNTHESIS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sota/tensor.hpp"

namespace sota {

/// Which pasted objects count as positive training targets.
enum class OodTargets { kAllObjects, kOnRoadOnly };

struct SynthConfig {
  int height = 256;
  int width = 256;
  int num_classes = 6;  // class 0 is road
  double ood_paste_probability = 0.9;
  int objects_min = 1;
  int objects_max = 3;
  double on_road_fraction = 0.6;
  double noise_level = 0.03;
  std::uint64_t seed = 1;
  int downsample_factor = 4;
  OodTargets targets = OodTargets::kAllObjects;

  void validate() const;
};

/// One generated road scene. The image lives on the 1/255 grid so the PNG
/// round-trip through the dataset directory is bit-exact.
struct SceneSample {
  Tensor<float> image;   // [3,H,W] in [0,1]
  MaskU8 class_labels;   // [H,W], closed-set labels; OOD never encoded here
  MaskU8 ood_mask;       // [H,W] pasted objects
  MaskU8 road_region;    // [H,W] geometric road polygon (diagnostics)
  MaskU8 on_road_mask;   // subset of ood_mask: blobs whose centroid is on road

  struct Blob {
    double centroid_y = 0, centroid_x = 0;
    bool centroid_on_road = false;
    int pixel_count = 0;
  };
  std::vector<Blob> blobs;  // per-object diagnostics, not serialized

  /// Supervision target per config: all pasted objects or on-road only.
  const MaskU8& target_mask(OodTargets t) const {
    return t == OodTargets::kAllObjects ? ood_mask : on_road_mask;
  }
};

/// Deterministic in (config.seed, index); no global state.
SceneSample synthesize_scene(const SynthConfig& config, std::int64_t index);

struct DatasetManifest {
  int version = 1;
  SynthConfig config;
  std::int64_t count = 0;
  std::vector<std::string> sample_stems;  // relative, without extension
};

/// Writes `count` samples and a manifest under out_dir. Re-running with the
/// same arguments reproduces identical bytes.
DatasetManifest synthesize_dataset(const SynthConfig& config, std::int64_t count,
                                   const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
SceneSample load_sample(const std::filesystem::path& dataset_dir, const std::string& stem,
                        int num_classes);

struct Dataset {
  SynthConfig config;
  std::vector<SceneSample> samples;
};

/// Loads every sample listed in the manifest (parallel, order-stable).
Dataset load_dataset(const std::filesystem::path& dataset_dir);

/// In-memory synthesis of `count` scenes (indices [first_index, ...)).
Dataset synthesize_in_memory(const SynthConfig& config, std::int64_t count,
                             std::int64_t first_index = 0);

}  // namespace sota

#endif  // SOTA_SCENE_SYNTHESIS_HPP_
