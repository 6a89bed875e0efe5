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

#include "sota/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "sota/errors.hpp"
#include "sota/tensor_file.hpp"

namespace sota {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void save_checkpoint(const std::filesystem::path& dir, const nn::ParamSet<float>& weights,
                     const nn::ParamSet<float>& adapters, const CheckpointMeta& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "weights", ec);
  if (ec) throw IoError("checkpoint: cannot create " + dir.string());
  for (const auto& [name, var] : weights.items)
    write_tensor_file(dir / "weights" / (name + ".sota"), var->value);

  std::vector<std::string> adapter_names;
  if (!adapters.items.empty()) {
    std::filesystem::create_directories(dir / "adapters", ec);
    if (ec) throw IoError("checkpoint: cannot create " + (dir / "adapters").string());
    for (const auto& [name, var] : adapters.items) {
      write_tensor_file(dir / "adapters" / (name + ".sota"), var->value);
      adapter_names.push_back(name);
    }
  }

  json j;
  j["component"] = meta.component;
  j["step"] = meta.step;
  j["config_hash"] = meta.config_hash;
  j["adapter_manifest"] = adapter_names;
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write " + (dir / "meta.json").string());
  out << j.dump(2) << "\n";
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw MissingInputError("checkpoint: missing " + (dir / "meta.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("checkpoint: malformed meta.json in " + dir.string() + ": " + e.what());
  }
  CheckpointMeta meta;
  meta.component = j.at("component").get<std::string>();
  meta.step = j.at("step").get<std::int64_t>();
  meta.config_hash = j.at("config_hash").get<std::string>();
  meta.adapter_names = j.at("adapter_manifest").get<std::vector<std::string>>();
  return meta;
}

namespace {

void load_set(const std::filesystem::path& subdir, const nn::ParamSet<float>& params) {
  for (const auto& [name, var] : params.items) {
    const auto path = subdir / (name + ".sota");
    Tensor<float> t = read_tensor_file_f32(path);
    if (t.shape() != var->value.shape())
      throw ShapeError("checkpoint: shape mismatch for " + name + ": stored " +
                       t.shape_str() + " vs model " + var->value.shape_str());
    var->value = std::move(t);
  }
}

}  // namespace

void load_checkpoint(const std::filesystem::path& dir, const nn::ParamSet<float>& weights,
                     const nn::ParamSet<float>& adapters) {
  load_set(dir / "weights", weights);
  if (!adapters.items.empty()) load_set(dir / "adapters", adapters);
}

}  // namespace sota
