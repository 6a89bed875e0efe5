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

#ifndef SOTA_CHECKPOINT_HPP_
#define SOTA_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "sota/nn.hpp"

namespace sota {

/// On-disk checkpoint: meta.json + weights/<name>.sota (+ adapters/<name>.sota
/// when adapters exist). Adapters are stored apart from base weights so the
/// base+adapters and merged forms both round-trip.
struct CheckpointMeta {
  std::string component;
  std::int64_t step = 0;
  std::string config_hash;
  std::vector<std::string> adapter_names;
};

void save_checkpoint(const std::filesystem::path& dir, const nn::ParamSet<float>& weights,
                     const nn::ParamSet<float>& adapters, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

/// Fills existing parameter tensors by name; throws MissingInputError /
/// ShapeError on missing entries or extent mismatches.
void load_checkpoint(const std::filesystem::path& dir, const nn::ParamSet<float>& weights,
                     const nn::ParamSet<float>& adapters);

/// FNV-1a over a canonical string; used to stamp configs into checkpoints.
std::string fnv1a_hex(const std::string& text);

}  // namespace sota

#endif  // SOTA_CHECKPOINT_HPP_
