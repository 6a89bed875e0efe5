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
#include "sota/png_io.hpp"
#include "sota/random.hpp"
#include "sota/tensor_file.hpp"

using namespace sota;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "sota_io_test";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("png round-trips gray and rgb bytes exactly") {
  Rng rng(1);
  for (int channels : {1, 3}) {
    ImageU8 img;
    img.width = 37;
    img.height = 23;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(37 * 23 * channels));
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    const fs::path path = temp_dir() / ("rt" + std::to_string(channels) + ".png");
    write_png(path, img);
    const ImageU8 back = read_png(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    REQUIRE(back.channels == channels);
    CHECK(back.pixels == img.pixels);
  }
}

TEST_CASE("png rejects missing files") {
  CHECK_THROWS_AS(read_png(temp_dir() / "nope.png"), MissingInputError);
}

TEST_CASE("tensor files round-trip bit-exactly across ranks and dtypes") {
  Rng rng(2);
  // Property sweep: every rank up to 4, both dtypes, random extents.
  for (int rank = 1; rank <= 4; ++rank) {
    for (int rep = 0; rep < 8; ++rep) {
      std::vector<int> shape;
      for (int d = 0; d < rank; ++d) shape.push_back(rng.uniform_int(1, 9));

      Tensor<float> tf(shape);
      for (std::int64_t i = 0; i < tf.size(); ++i)
        tf[i] = static_cast<float>(rng.normal()) * 1e3f;
      const fs::path pf = temp_dir() / "t.f32";
      write_tensor_file(pf, tf);
      const Tensor<float> tf_back = read_tensor_file_f32(pf);
      REQUIRE(tf_back.shape() == tf.shape());
      CHECK(std::memcmp(tf_back.data(), tf.data(), tf.size() * sizeof(float)) == 0);

      Tensor<std::uint8_t> tu(shape);
      for (std::int64_t i = 0; i < tu.size(); ++i)
        tu[i] = static_cast<std::uint8_t>(rng.below(256));
      const fs::path pu = temp_dir() / "t.u8";
      write_tensor_file(pu, tu);
      const Tensor<std::uint8_t> tu_back = read_tensor_file_u8(pu);
      REQUIRE(tu_back.shape() == tu.shape());
      CHECK(std::memcmp(tu_back.data(), tu.data(), static_cast<std::size_t>(tu.size())) == 0);
    }
  }
}

TEST_CASE("tensor file header is the documented layout") {
  Tensor<float> t({2, 3});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  const fs::path path = temp_dir() / "hdr.sota";
  write_tensor_file(path, t);

  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::memcmp(magic, "SOTA", 4) == 0);
  std::uint16_t version;
  in.read(reinterpret_cast<char*>(&version), 2);
  CHECK(version == 1);
  std::uint8_t dtype, rank;
  in.read(reinterpret_cast<char*>(&dtype), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  CHECK(dtype == 0);
  CHECK(rank == 2);
  std::uint32_t d0, d1;
  in.read(reinterpret_cast<char*>(&d0), 4);
  in.read(reinterpret_cast<char*>(&d1), 4);
  CHECK(d0 == 2);
  CHECK(d1 == 3);
  CHECK(peek_tensor_dtype(path) == TensorDtype::kF32);
  CHECK_THROWS_AS(read_tensor_file_u8(path), IoError);
}

TEST_CASE("tensor file rejects corruption") {
  const fs::path path = temp_dir() / "bad.sota";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(read_tensor_file_f32(path), IoError);

  Tensor<float> t({4});
  write_tensor_file(path, t);
  // Truncate payload.
  fs::resize_file(path, fs::file_size(path) - 2);
  CHECK_THROWS_AS(read_tensor_file_f32(path), IoError);
}
