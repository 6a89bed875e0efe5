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

// Internal JSON helpers shared by the config and dataset code. Not installed.

#ifndef SOTA_SRC_JSON_UTIL_HPP_
#define SOTA_SRC_JSON_UTIL_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "sota/errors.hpp"
#include "sota/scene_synthesis.hpp"

namespace sota::detail {

using nlohmann::json;

/// Throws ConfigError when `j` holds a key outside `allowed`; `where` names
/// the object for the message.
inline void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + where + "." + it.key() + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value type for '") + key + "'");
  }
}

inline json synth_config_to_json(const SynthConfig& c) {
  json j;
  j["image_size"] = std::vector<int>{c.height, c.width};
  j["num_classes"] = c.num_classes;
  j["ood_paste_probability"] = c.ood_paste_probability;
  j["objects_per_scene"] = std::vector<int>{c.objects_min, c.objects_max};
  j["on_road_fraction"] = c.on_road_fraction;
  j["noise_level"] = c.noise_level;
  j["seed"] = c.seed;
  j["downsample_factor"] = c.downsample_factor;
  j["targets"] = c.targets == OodTargets::kAllObjects ? "all" : "on_road_only";
  return j;
}

inline SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  reject_unknown_keys(j,
                      {"image_size", "num_classes", "ood_paste_probability",
                       "objects_per_scene", "on_road_fraction", "noise_level", "seed",
                       "downsample_factor", "targets"},
                      "synth");
  if (j.contains("image_size")) {
    const auto v = j.at("image_size").get<std::vector<int>>();
    if (v.size() != 2) throw ConfigError("config: synth.image_size must be [height, width]");
    c.height = v[0];
    c.width = v[1];
  }
  read_field(j, "num_classes", c.num_classes);
  read_field(j, "ood_paste_probability", c.ood_paste_probability);
  if (j.contains("objects_per_scene")) {
    const auto v = j.at("objects_per_scene").get<std::vector<int>>();
    if (v.size() != 2) throw ConfigError("config: synth.objects_per_scene must be [min, max]");
    c.objects_min = v[0];
    c.objects_max = v[1];
  }
  read_field(j, "on_road_fraction", c.on_road_fraction);
  read_field(j, "noise_level", c.noise_level);
  read_field(j, "seed", c.seed);
  read_field(j, "downsample_factor", c.downsample_factor);
  if (j.contains("targets")) {
    const std::string t = j.at("targets").get<std::string>();
    if (t == "all")
      c.targets = OodTargets::kAllObjects;
    else if (t == "on_road_only")
      c.targets = OodTargets::kOnRoadOnly;
    else
      throw ConfigError("config: synth.targets must be 'all' or 'on_road_only'");
  }
  return c;
}

}  // namespace sota::detail

#endif  // SOTA_SRC_JSON_UTIL_HPP_
