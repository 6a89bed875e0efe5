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

// End-to-end checks of the command-line surface via subprocesses. The binary
// path comes from the build system (SOTA_CLI_PATH).

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sota/eval_report.hpp"
#include "sota/png_io.hpp"
#include "sota/tensor_file.hpp"
#include "sota/visualize.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = SOTA_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir() {
  const fs::path p = fs::temp_directory_path() / "sota_cli_test";
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_config(const fs::path& path) {
  std::ofstream out(path);
  out << R"({
  "seed": 5,
  "synth": {"image_size": [64, 64]},
  "morphology": {"kernel_size": 3, "iterations": 1}
})";
}

}  // namespace

TEST_CASE("cli: synth then oracle eval produces a parsable report") {
  const fs::path dir = work_dir();
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_config(dir / "cfg.json");

  CHECK(run("synth --config " + (dir / "cfg.json").string() + " --count 5 --out " +
            (dir / "data").string()) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "config.resolved.json"));

  CHECK(run("eval --config " + (dir / "cfg.json").string() + " --data " +
            (dir / "data").string() + " --source oracle --out " + (dir / "eval").string()) ==
        0);
  const sota::EvalReport report = sota::EvalReport::read_json(dir / "eval" / "report.json");
  CHECK(report.num_samples == 5);
  CHECK(report.auroc >= 0.0);
  CHECK(report.auroc <= 1.0);
  CHECK(fs::exists(dir / "eval" / "report.csv"));
}

TEST_CASE("cli: eval twice gives byte-identical reports") {
  const fs::path dir = work_dir();
  // Reuses the dataset from the previous case (test order is file order).
  REQUIRE(fs::exists(dir / "data" / "manifest.json"));
  CHECK(run("eval --config " + (dir / "cfg.json").string() + " --data " +
            (dir / "data").string() + " --source oracle --out " + (dir / "eval_b").string()) ==
        0);
  CHECK(slurp(dir / "eval" / "report.json") == slurp(dir / "eval_b" / "report.json"));
}

TEST_CASE("cli: refusing to overwrite a non-empty output directory") {
  const fs::path dir = work_dir() / "ow_case";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_config(dir / "cfg.json");
  REQUIRE(run("synth --config " + (dir / "cfg.json").string() + " --count 2 --out " +
              (dir / "data").string()) == 0);
  // Without --overwrite: exit code 2 (usage/config error).
  CHECK(run("synth --config " + (dir / "cfg.json").string() + " --count 2 --out " +
            (dir / "data").string()) == 2);
  CHECK(run("synth --config " + (dir / "cfg.json").string() + " --count 2 --overwrite --out " +
            (dir / "data").string()) == 0);
}

TEST_CASE("cli: distinct exit codes for config, missing-input, and shape errors") {
  const fs::path dir = work_dir();
  std::ofstream(dir / "bad.json") << R"({"unknown_key": 1})";
  CHECK(run("synth --config " + (dir / "bad.json").string() + " --count 1 --out " +
            (dir / "x1").string()) == 2);

  CHECK(run("eval --config " + (dir / "cfg.json").string() + " --data " +
            (dir / "no_such_dir").string() + " --source oracle --out " +
            (dir / "x2").string()) == 3);

  // Image extents not divisible by the downsample factor: shape error (4).
  std::ofstream(dir / "bad_shape.json") << R"({"synth": {"image_size": [66, 66]}})";
  CHECK(run("synth --config " + (dir / "bad_shape.json").string() + " --count 1 --out " +
            (dir / "x3").string()) == 4);
}

TEST_CASE("cli: viz renders a uniform mid-colormap image for a constant map") {
  const fs::path dir = work_dir() / "viz_case";
  fs::remove_all(dir);
  fs::create_directories(dir / "pred");
  sota::Tensor<float> score = sota::Tensor<float>::full({24, 32}, 0.5f);
  sota::write_tensor_file(dir / "pred" / "flat.final.sota", score);

  CHECK(run("viz --pred " + (dir / "pred").string() + " --out " + (dir / "out").string()) ==
        0);
  const sota::ImageU8 img = sota::read_png(dir / "out" / "flat.heatmap.png");
  CHECK(img.height == 24);
  CHECK(img.width == 32);
  const sota::Rgb8 mid = sota::score_color(0.5f);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      CHECK(img.at(y, x, 0) == mid.r);
      CHECK(img.at(y, x, 1) == mid.g);
      CHECK(img.at(y, x, 2) == mid.b);
    }
}

TEST_CASE("cli: rerunning from the echoed config reproduces outputs byte-for-byte") {
  const fs::path dir = work_dir() / "echo_case";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_config(dir / "cfg.json");
  REQUIRE(run("synth --config " + (dir / "cfg.json").string() + " --count 3 --out " +
              (dir / "a").string()) == 0);
  // The echoed config is fully resolved; feeding it back must reproduce the
  // dataset bit for bit.
  REQUIRE(run("synth --config " + (dir / "a" / "config.resolved.json").string() +
              " --count 3 --out " + (dir / "b").string()) == 0);
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    CHECK(slurp(entry.path()) == slurp(dir / "b" / rel));
  }
}

TEST_CASE("cli: read-only commands do not mutate their inputs") {
  const fs::path dir = work_dir();
  REQUIRE(fs::exists(dir / "data"));
  const std::string manifest_before = slurp(dir / "data" / "manifest.json");
  const std::string image_before = slurp(dir / "data" / "samples" / "000000.image.png");
  CHECK(run("eval --config " + (dir / "cfg.json").string() + " --data " +
            (dir / "data").string() + " --source oracle --overwrite --out " +
            (dir / "eval_c").string()) == 0);
  CHECK(slurp(dir / "data" / "manifest.json") == manifest_before);
  CHECK(slurp(dir / "data" / "samples" / "000000.image.png") == image_before);
}
