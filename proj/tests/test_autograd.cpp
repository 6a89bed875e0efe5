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

#include <cmath>

#include "doctest.h"
#include "sota/autograd.hpp"
#include "sota/nn.hpp"
#include "sota/random.hpp"
#include "test_support.hpp"

using namespace sota;
using ag::Var;

namespace {

Var<double> randn_leaf(std::vector<int> shape, Rng& rng, bool grad = true) {
  return ag::leaf(Tensor<double>::randn(std::move(shape), rng), grad);
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(42);
  auto a = randn_leaf({3, 5}, rng);
  auto b = randn_leaf({3, 5}, rng);
  const double err = testing::fd_max_rel_err({a, b}, [&] {
    auto t = ag::mul(ag::add(a, b), ag::sub(a, b));
    return ag::mean_all(ag::gelu(ag::sigmoid(t)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("matmul, transpose and softmax match finite differences") {
  Rng rng(7);
  auto a = randn_leaf({4, 3}, rng);
  auto b = randn_leaf({3, 6}, rng);
  const double err = testing::fd_max_rel_err({a, b}, [&] {
    auto y = ag::softmax_rows(ag::matmul(a, b));
    return ag::sum_all(ag::mul(y, y));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("layer norm rows matches finite differences") {
  Rng rng(11);
  auto x = randn_leaf({5, 8}, rng);
  auto gamma = randn_leaf({8}, rng);
  auto beta = randn_leaf({8}, rng);
  const double err = testing::fd_max_rel_err({x, gamma, beta}, [&] {
    return ag::mean_all(ag::layer_norm_rows(x, gamma, beta, 1e-6));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("conv2d forward matches a direct loop") {
  Rng rng(3);
  auto x = randn_leaf({2, 6, 6}, rng);
  auto w = randn_leaf({3, 2, 3, 3}, rng);
  auto b = randn_leaf({3}, rng);
  auto y = ag::conv2d(x, w, b, 1, 1);
  REQUIRE(y->value.shape() == std::vector<int>{3, 6, 6});

  for (int co = 0; co < 3; ++co)
    for (int oy = 0; oy < 6; ++oy)
      for (int ox = 0; ox < 6; ++ox) {
        double acc = b->value[co];
        for (int ci = 0; ci < 2; ++ci)
          for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
              const int iy = oy + dy - 1, ix = ox + dx - 1;
              if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
              acc += x->value.at3(ci, iy, ix) *
                     w->value[((co * 2 + ci) * 3 + dy) * 3 + dx];
            }
        CHECK(y->value.at3(co, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(5);
  auto x = randn_leaf({2, 5, 5}, rng);
  auto w = randn_leaf({4, 2, 3, 3}, rng);
  auto b = randn_leaf({4}, rng);
  const double err = testing::fd_max_rel_err({x, w, b}, [&] {
    return ag::mean_all(ag::gelu(ag::conv2d(x, w, b, 2, 1)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("conv_transpose2d doubles extents and matches finite differences") {
  Rng rng(9);
  auto x = randn_leaf({3, 4, 4}, rng);
  auto w = randn_leaf({3, 2, 2, 2}, rng);
  auto b = randn_leaf({2}, rng);
  auto y = ag::conv_transpose2d(x, w, b, 2);
  REQUIRE(y->value.shape() == std::vector<int>{2, 8, 8});
  const double err = testing::fd_max_rel_err({x, w, b}, [&] {
    return ag::mean_all(ag::sigmoid(ag::conv_transpose2d(x, w, b, 2)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("spatial ops match finite differences") {
  Rng rng(13);
  auto x = randn_leaf({2, 8, 8}, rng);
  SUBCASE("avg_pool2d") {
    const double err =
        testing::fd_max_rel_err({x}, [&] { return ag::mean_all(ag::mul(ag::avg_pool2d(x, 4), ag::avg_pool2d(x, 4))); });
    CHECK(err < 1e-6);
  }
  SUBCASE("bilinear upsample") {
    const double err = testing::fd_max_rel_err(
        {x}, [&] { return ag::mean_all(ag::gelu(ag::bilinear_resize(x, 11, 5))); });
    CHECK(err < 1e-6);
  }
  SUBCASE("scale_by_map and channel_dot") {
    auto m = randn_leaf({1, 8, 8}, rng);
    auto v = randn_leaf({2}, rng);
    const double err = testing::fd_max_rel_err({x, m, v}, [&] {
      return ag::mean_all(ag::channel_dot(ag::scale_by_map(x, m), v));
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("reductions, slicing and pooling match finite differences") {
  Rng rng(17);
  auto x = randn_leaf({4, 6}, rng);
  SUBCASE("min-max rescale graph") {
    const double err = testing::fd_max_rel_err({x}, [&] {
      auto lo = ag::reduce_min(x);
      auto hi = ag::reduce_max(x);
      auto range = ag::sub(hi, lo);
      auto y = ag::div_scalar_node(ag::sub_scalar_node(x, lo), range);
      return ag::mean_all(ag::mul(y, y));
    });
    CHECK(err < 1e-5);
  }
  SUBCASE("rows and tokens") {
    const double err = testing::fd_max_rel_err({x}, [&] {
      auto rows = ag::concat_rows(ag::slice_rows(x, 0, 2), ag::slice_rows(x, 1, 4));
      auto tok = ag::pooled_tokens(ag::transpose(rows), 3);
      return ag::sum_all(ag::mul(tok, tok));
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("frozen subgraphs are pruned from the tape") {
  Rng rng(23);
  auto frozen = ag::constant(Tensor<double>::randn({3, 3}, rng));
  auto live = randn_leaf({3, 3}, rng);
  auto y = ag::mul(ag::add(frozen, live), frozen);
  CHECK(y->requires_grad);
  auto dead = ag::mul(frozen, frozen);
  CHECK_FALSE(dead->requires_grad);
  CHECK(dead->parents.empty());

  ag::backward(ag::mean_all(y));
  CHECK_FALSE(live->grad.empty());
  CHECK(frozen->grad.empty());
}

TEST_CASE("linear layer with adapter matches finite differences") {
  Rng rng(29);
  nn::Linear<double> lin(5, 4, rng);
  lin.attach_adapter(2, 0.5, rng);
  // Perturb up so the adapter branch is active.
  nn::ParamSet<double> ps;
  lin.collect_adapter(ps, "a");
  for (auto& [n, v] : ps.items)
    for (std::int64_t i = 0; i < v->value.size(); ++i) v->value[i] += 0.1 * (i + 1);

  auto x = randn_leaf({3, 5}, rng);
  std::vector<Var<double>> leaves{x};
  for (auto& [n, v] : ps.items) leaves.push_back(v);
  const double err = testing::fd_max_rel_err(
      leaves, [&] { return ag::mean_all(ag::gelu(lin.forward(x))); });
  CHECK(err < 1e-6);
}

TEST_CASE("adam skips frozen parameters") {
  Rng rng(31);
  nn::ParamSet<double> ps;
  auto live = nn::make_param(Tensor<double>::randn({4}, rng));
  auto frozen = nn::make_param(Tensor<double>::randn({4}, rng));
  frozen->requires_grad = false;
  ps.add("live", live);
  ps.add("frozen", frozen);
  const Tensor<double> frozen_before = frozen->value;

  nn::Adam<double> opt(ps);
  for (int it = 0; it < 3; ++it) {
    opt.zero_grad();
    auto loss = ag::mean_all(ag::mul(live, live));
    ag::backward(loss);
    opt.step(0.05);
  }
  CHECK(max_abs_diff(frozen->value, frozen_before) == 0.0);
  CHECK(max_abs_diff(live->value, frozen_before) != 0.0);
}
