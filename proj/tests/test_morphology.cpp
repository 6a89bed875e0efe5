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

#include "doctest.h"
#include "oracles.hpp"
#include "sota/morphology.hpp"
#include "sota/random.hpp"

using namespace sota;

namespace {

MaskU8 random_mask(int h, int w, double density, Rng& rng) {
  MaskU8 m({h, w});
  for (std::int64_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(density) ? 1 : 0;
  return m;
}

bool masks_equal(const MaskU8& a, const MaskU8& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size())) == 0;
}

MaskU8 cyclic_shift(const MaskU8& m, int sy, int sx) {
  const int h = m.dim(0), w = m.dim(1);
  MaskU8 out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at2((y + sy) % h, (x + sx) % w) = m.at2(y, x);
  return out;
}

}  // namespace

TEST_CASE("zero iterations is the identity") {
  Rng rng(1);
  const MaskU8 m = random_mask(16, 16, 0.4, rng);
  for (MorphMode mode : {MorphMode::kErodeThenDilate, MorphMode::kDilateOnly}) {
    MorphologyConfig cfg{3, 0, mode};
    CHECK(masks_equal(refine_mask(m, cfg), m));
  }
}

TEST_CASE("single centered pixel dilates to the kernel footprint") {
  MaskU8 m({9, 9});
  m.at2(4, 4) = 1;
  MorphologyConfig cfg{3, 1, MorphMode::kDilateOnly};
  const MaskU8 out = refine_mask(m, cfg);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const bool inside = std::abs(y - 4) <= 1 && std::abs(x - 4) <= 1;
      CHECK(out.at2(y, x) == (inside ? 1 : 0));
    }
}

TEST_CASE("border pixels are always eroded under zero padding") {
  MaskU8 m({5, 5});
  m.fill(1);
  const MaskU8 out = erode(m, 3);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const bool interior = y >= 1 && y <= 3 && x >= 1 && x <= 3;
      CHECK(out.at2(y, x) == (interior ? 1 : 0));
    }
}

TEST_CASE("random masks match the neighborhood-enumeration oracle") {
  Rng rng(99);
  for (int rep = 0; rep < 40; ++rep) {
    const MaskU8 m = random_mask(32, 32, rng.uniform(0.2, 0.7), rng);
    for (int k : {3, 5}) {
      for (int n : {1, 2}) {
        for (MorphMode mode : {MorphMode::kErodeThenDilate, MorphMode::kDilateOnly}) {
          MorphologyConfig cfg{k, n, mode};
          const MaskU8 got = refine_mask(m, cfg);
          const MaskU8 want =
              oracle::refine_enum(m, k, n, mode == MorphMode::kErodeThenDilate);
          CHECK(masks_equal(got, want));
        }
      }
    }
  }
}

TEST_CASE("dilate_only output is a superset of the input") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const MaskU8 m = random_mask(24, 24, 0.3, rng);
    MorphologyConfig cfg{3, rng.uniform_int(1, 3), MorphMode::kDilateOnly};
    const MaskU8 out = refine_mask(m, cfg);
    for (std::int64_t i = 0; i < m.size(); ++i)
      if (m[i]) CHECK(out[i] == 1);
  }
}

TEST_CASE("opening is idempotent: refining twice is a fixed point") {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const MaskU8 m = random_mask(28, 28, rng.uniform(0.3, 0.8), rng);
    for (int n : {1, 2}) {
      MorphologyConfig cfg{3, n, MorphMode::kErodeThenDilate};
      const MaskU8 once = refine_mask(m, cfg);
      const MaskU8 twice = refine_mask(once, cfg);
      CHECK(masks_equal(once, twice));
    }
  }
}

TEST_CASE("refine commutes with cyclic shifts for interior-supported masks") {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    // Support kept well inside the border so padding never interferes.
    MaskU8 m({32, 32});
    for (int y = 10; y < 22; ++y)
      for (int x = 10; x < 22; ++x) m.at2(y, x) = rng.bernoulli(0.5) ? 1 : 0;
    MorphologyConfig cfg{3, 1, MorphMode::kErodeThenDilate};
    const int sy = rng.uniform_int(1, 4), sx = rng.uniform_int(1, 4);
    const MaskU8 a = refine_mask(cyclic_shift(m, sy, sx), cfg);
    const MaskU8 b = cyclic_shift(refine_mask(m, cfg), sy, sx);
    CHECK(masks_equal(a, b));
  }
}

TEST_CASE("config validation rejects even kernels and negative iterations") {
  MaskU8 m({4, 4});
  CHECK_THROWS_AS(refine_mask(m, MorphologyConfig{4, 1, MorphMode::kDilateOnly}), ConfigError);
  CHECK_THROWS_AS(refine_mask(m, MorphologyConfig{3, -1, MorphMode::kDilateOnly}), ConfigError);
}
