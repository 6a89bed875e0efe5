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

#ifndef SOTA_BENCH_RUNNER_HPP_
#define SOTA_BENCH_RUNNER_HPP_

#include <string>

#include "sota/pipeline.hpp"

namespace sota {

/// Wall-time comparison of the base-only score path against the full
/// prediction path, per image, over `repetitions` passes.
struct BenchReport {
  int repetitions = 0;
  int images = 0;
  double base_median_ms = 0;
  double base_iqr_ms = 0;
  double full_median_ms = 0;
  double full_iqr_ms = 0;
  double ratio = 0;  // full_median / base_median

  std::string to_json_string() const;
};

BenchReport run_bench(const Dataset& dataset, const PipelineBundle& bundle, int repetitions);

}  // namespace sota

#endif  // SOTA_BENCH_RUNNER_HPP_
