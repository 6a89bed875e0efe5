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

#ifndef SOTA_TESTS_ACCEPTANCE_SUPPORT_HPP_
#define SOTA_TESTS_ACCEPTANCE_SUPPORT_HPP_

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace sota::acceptance {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;  // fills a detail string
};

class Harness {
 public:
  void add(std::string name, std::function<bool(std::string&)> fn) {
    criteria_.push_back({std::move(name), std::move(fn)});
  }

  int run_all() {
    int failures = 0;
    for (auto& c : criteria_) {
      const auto t0 = std::chrono::steady_clock::now();
      std::string detail;
      bool ok = false;
      try {
        ok = c.run(detail);
      } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("[%s] %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", c.name.c_str(), secs,
                  detail.empty() ? "" : " -- ", detail.c_str());
      std::fflush(stdout);
      if (!ok) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria_.size()) - failures,
                criteria_.size());
    return failures == 0 ? 0 : 1;
  }

 private:
  std::vector<Criterion> criteria_;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace sota::acceptance

#endif  // SOTA_TESTS_ACCEPTANCE_SUPPORT_HPP_
