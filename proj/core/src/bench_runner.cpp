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

#include "sota/bench_runner.hpp"

#include <algorithm>
#include <chrono>

#include "json.hpp"
#include "sota/errors.hpp"

namespace sota {
namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return v[lo] + f * (v[hi] - v[lo]);
}

struct Stats {
  double median, iqr;
};

Stats summarize(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  return {quantile_sorted(samples, 0.5),
          quantile_sorted(samples, 0.75) - quantile_sorted(samples, 0.25)};
}

}  // namespace

BenchReport run_bench(const Dataset& dataset, const PipelineBundle& bundle, int repetitions) {
  if (repetitions < 3) throw ConfigError("bench: repetitions must be >= 3");
  if (dataset.samples.empty()) throw MissingInputError("bench: dataset is empty");

  using clock = std::chrono::steady_clock;
  std::vector<double> base_ms, full_ms;
  // One untimed pass warms caches and any lazy allocations.
  {
    const auto& s = dataset.samples.front();
    volatile float sink = ood_score(bundle.base.forward(ag::constant(s.image))->value,
                                    bundle.config.normalization)
                              .values[0];
    (void)sink;
    volatile float sink2 = predict(s.image, bundle).final_map[0];
    (void)sink2;
  }
  for (int rep = 0; rep < repetitions; ++rep) {
    for (const auto& s : dataset.samples) {
      const auto t0 = clock::now();
      const auto logits = bundle.base.forward(ag::constant(s.image))->value;
      volatile float sink = ood_score(logits, bundle.config.normalization).values[0];
      (void)sink;
      const auto t1 = clock::now();
      volatile float sink2 = predict(s.image, bundle).final_map[0];
      (void)sink2;
      const auto t2 = clock::now();
      base_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      full_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
  }

  const Stats base = summarize(base_ms);
  const Stats full = summarize(full_ms);
  BenchReport r;
  r.repetitions = repetitions;
  r.images = static_cast<int>(dataset.samples.size());
  r.base_median_ms = base.median;
  r.base_iqr_ms = base.iqr;
  r.full_median_ms = full.median;
  r.full_iqr_ms = full.iqr;
  r.ratio = full.median / base.median;
  return r;
}

std::string BenchReport::to_json_string() const {
  nlohmann::json j;
  j["repetitions"] = repetitions;
  j["images"] = images;
  j["base_only"] = {{"median_ms", base_median_ms}, {"iqr_ms", base_iqr_ms}};
  j["full_pipeline"] = {{"median_ms", full_median_ms}, {"iqr_ms", full_iqr_ms}};
  j["ratio"] = ratio;
  return j.dump(2) + "\n";
}

}  // namespace sota
