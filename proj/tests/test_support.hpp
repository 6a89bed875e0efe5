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

#ifndef SOTA_TESTS_TEST_SUPPORT_HPP_
#define SOTA_TESTS_TEST_SUPPORT_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "sota/autograd.hpp"

namespace sota::testing {

// Central-difference gradient check against the tape. `build` must construct
// a scalar graph from the given leaves each time it is called (leaf values
// are perturbed in place between calls). Returns the worst relative error,
// with a small absolute floor so near-zero gradients do not blow up the
// ratio.
inline double fd_max_rel_err(const std::vector<ag::Var<double>>& leaves,
                             const std::function<ag::Var<double>()>& build,
                             double floor = 1e-3) {
  ag::Var<double> root = build();
  for (const auto& l : leaves) l->zero_grad();
  ag::backward(root);
  std::vector<Tensor<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& l : leaves) {
    analytic.push_back(l->grad.empty() ? Tensor<double>(l->value.shape()) : l->grad);
  }

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor<double>& x = leaves[li]->value;
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const double x0 = x[i];
      const double h = 1e-5 * std::max(1.0, std::abs(x0));
      x[i] = x0 + h;
      const double fp = build()->value[0];
      x[i] = x0 - h;
      const double fm = build()->value[0];
      x[i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][i];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace sota::testing

#endif  // SOTA_TESTS_TEST_SUPPORT_HPP_
