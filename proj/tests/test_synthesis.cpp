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
#include <fstream>

#include "doctest.h"
#include "sota/scene_synthesis.hpp"

using namespace sota;
namespace fs = std::filesystem;

namespace {

SynthConfig toy_config() {
  SynthConfig c;
  c.height = 64;
  c.width = 64;
  c.seed = 77;
  return c;
}

bool tensors_equal(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

bool masks_equal(const MaskU8& a, const MaskU8& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size())) == 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("same (config, index) yields bit-identical samples") {
  const SynthConfig cfg = toy_config();
  for (std::int64_t idx : {0, 5, 123}) {
    const SceneSample a = synthesize_scene(cfg, idx);
    const SceneSample b = synthesize_scene(cfg, idx);
    CHECK(tensors_equal(a.image, b.image));
    CHECK(masks_equal(a.class_labels, b.class_labels));
    CHECK(masks_equal(a.ood_mask, b.ood_mask));
    CHECK(masks_equal(a.road_region, b.road_region));
    CHECK(masks_equal(a.on_road_mask, b.on_road_mask));
  }
}

TEST_CASE("paste probability zero means no OOD pixels ever") {
  SynthConfig cfg = toy_config();
  cfg.ood_paste_probability = 0.0;
  for (std::int64_t idx = 0; idx < 50; ++idx) {
    const SceneSample s = synthesize_scene(cfg, idx);
    CHECK(max_value(s.ood_mask) == 0);
    CHECK(s.blobs.empty());
  }
}

TEST_CASE("paste fraction over 1000 samples tracks p = 0.9") {
  // Oracle: direct counting of nonempty masks.
  const SynthConfig cfg = toy_config();
  int nonempty = 0;
  for (std::int64_t idx = 0; idx < 1000; ++idx) {
    const SceneSample s = synthesize_scene(cfg, idx);
    if (max_value(s.ood_mask) != 0) ++nonempty;
  }
  const double fraction = nonempty / 1000.0;
  CHECK(fraction > 0.87);
  CHECK(fraction < 0.93);
}

TEST_CASE("on-road centroid coverage tracks on_road_fraction") {
  SynthConfig cfg = toy_config();
  cfg.on_road_fraction = 0.6;
  int on_road = 0, total = 0;
  for (std::int64_t idx = 0; idx < 500; ++idx) {
    const SceneSample s = synthesize_scene(cfg, idx);
    for (const auto& b : s.blobs) {
      ++total;
      if (b.centroid_on_road) ++on_road;
    }
  }
  REQUIRE(total > 500);
  const double fraction = static_cast<double>(on_road) / total;
  CHECK(fraction > 0.53);
  CHECK(fraction < 0.67);
}

TEST_CASE("label hygiene: closed-set labels never encode OOD") {
  const SynthConfig cfg = toy_config();
  for (std::int64_t idx = 0; idx < 50; ++idx) {
    const SceneSample s = synthesize_scene(cfg, idx);
    for (std::int64_t i = 0; i < s.class_labels.size(); ++i) {
      CHECK(s.class_labels[i] < cfg.num_classes);
      // on_road_mask is a subset of ood_mask
      if (s.on_road_mask[i]) CHECK(s.ood_mask[i] == 1);
    }
  }
}

TEST_CASE("scene structure: road polygon is class 0 and sky sits above it") {
  const SynthConfig cfg = toy_config();
  const SceneSample s = synthesize_scene(cfg, 3);
  int road_px = 0;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      if (s.road_region.at2(y, x)) {
        ++road_px;
        CHECK(s.class_labels.at2(y, x) == 0);
      }
    }
  CHECK(road_px > cfg.height * cfg.width / 20);
  // Every off-road below-horizon pixel keeps an inlier class in 1..C-1: the
  // bottom row's leftmost pixel is either road or a side class.
  const int bottom_left = s.class_labels.at2(cfg.height - 1, 0);
  CHECK(bottom_left >= 0);
  CHECK(bottom_left < cfg.num_classes);
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg = toy_config();
  cfg.ood_paste_probability = 1.5;
  CHECK_THROWS_AS(synthesize_scene(cfg, 0), ConfigError);
  cfg = toy_config();
  cfg.height = 66;  // not divisible by downsample factor 4
  CHECK_THROWS_AS(synthesize_scene(cfg, 0), ShapeError);
  cfg = toy_config();
  cfg.num_classes = 1;
  CHECK_THROWS_AS(synthesize_scene(cfg, 0), ConfigError);
}

TEST_CASE("dataset round-trip reproduces in-memory synthesis") {
  const fs::path dir = fs::temp_directory_path() / "sota_synth_rt";
  fs::remove_all(dir);
  const SynthConfig cfg = toy_config();
  const DatasetManifest manifest = synthesize_dataset(cfg, 10, dir);
  REQUIRE(manifest.sample_stems.size() == 10);

  const Dataset loaded = load_dataset(dir);
  REQUIRE(loaded.samples.size() == 10);
  CHECK(loaded.config.seed == cfg.seed);
  for (std::int64_t i = 0; i < 10; ++i) {
    const SceneSample fresh = synthesize_scene(cfg, i);
    const SceneSample& disk = loaded.samples[static_cast<std::size_t>(i)];
    CHECK(tensors_equal(fresh.image, disk.image));
    CHECK(masks_equal(fresh.class_labels, disk.class_labels));
    CHECK(masks_equal(fresh.ood_mask, disk.ood_mask));
    CHECK(masks_equal(fresh.road_region, disk.road_region));
    CHECK(masks_equal(fresh.on_road_mask, disk.on_road_mask));
  }
}

TEST_CASE("dataset synthesis is byte-identical across reruns") {
  const fs::path dir_a = fs::temp_directory_path() / "sota_synth_a";
  const fs::path dir_b = fs::temp_directory_path() / "sota_synth_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  const SynthConfig cfg = toy_config();
  synthesize_dataset(cfg, 4, dir_a);
  synthesize_dataset(cfg, 4, dir_b);

  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(entry.path(), dir_a);
    CHECK(slurp(entry.path()) == slurp(dir_b / rel));
  }
  CHECK(files == 4 * 5 + 1);  // five PNGs per sample plus the manifest
}

TEST_CASE("count zero writes a manifest with an empty sample list") {
  const fs::path dir = fs::temp_directory_path() / "sota_synth_zero";
  fs::remove_all(dir);
  const SynthConfig cfg = toy_config();
  const DatasetManifest manifest = synthesize_dataset(cfg, 0, dir);
  CHECK(manifest.sample_stems.empty());
  const DatasetManifest back = read_manifest(dir);
  CHECK(back.count == 0);
  CHECK(back.config.num_classes == cfg.num_classes);
  CHECK(back.sample_stems.empty());
}
