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

// Microbenchmarks for the numeric kernels and the composed pipeline.
// Build with optimizations; run longer with --benchmark_min_time for stable
// numbers.

#include <benchmark/benchmark.h>

#include "sota/base_segmentor.hpp"
#include "sota/metrics.hpp"
#include "sota/morphology.hpp"
#include "sota/pipeline.hpp"
#include "sota/scene_prompt.hpp"
#include "sota/scene_synthesis.hpp"

using namespace sota;

namespace {

SceneSample make_sample(int size) {
  SynthConfig cfg;
  cfg.height = cfg.width = size;
  cfg.seed = 7;
  return synthesize_scene(cfg, 0);
}

void BM_SceneSynthesis(benchmark::State& state) {
  SynthConfig cfg;
  cfg.height = cfg.width = static_cast<int>(state.range(0));
  cfg.seed = 7;
  std::int64_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_scene(cfg, index++));
  }
}
BENCHMARK(BM_SceneSynthesis)->Arg(64)->Arg(256);

void BM_Conv2dForward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  Rng rng(1);
  const Tensor<float> x = Tensor<float>::randn({ch, 64, 64}, rng);
  const Tensor<float> w = Tensor<float>::randn({ch, ch, 3, 3}, rng, 0.05f);
  const Tensor<float> b({ch});
  for (auto _ : state) {
    benchmark::DoNotOptimize(linalg::conv2d_fwd(x, w, &b, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * 2LL * ch * ch * 9 * 64 * 64);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(64);

void BM_BaseSegmentorForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  SegmentorConfig<float> cfg;
  BaseSegmentor<float> seg(cfg, Rng(3));
  const SceneSample s = make_sample(size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(seg.forward(ag::constant(s.image))->value);
  }
}
BENCHMARK(BM_BaseSegmentorForward)->Arg(64)->Arg(256);

void BM_RefineMask(benchmark::State& state) {
  Rng rng(5);
  MaskU8 mask({256, 256});
  for (std::int64_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(0.5) ? 1 : 0;
  MorphologyConfig cfg;
  cfg.kernel_size = static_cast<int>(state.range(0));
  cfg.iterations = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(refine_mask(mask, cfg));
  }
}
BENCHMARK(BM_RefineMask)->Args({5, 2})->Args({15, 15});

void BM_CrossAttention(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  CrossAttention<float> ca(d, Rng(7));
  Rng rng(8);
  auto gated = ag::constant(Tensor<float>::randn({1, 64, 64}, rng));
  auto anomaly = ag::constant(Tensor<float>::randn({1, 64, 64}, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ca.forward(gated, anomaly, 4).embedding->value);
  }
}
BENCHMARK(BM_CrossAttention)->Arg(64)->Arg(256);

void BM_PixelMetrics(benchmark::State& state) {
  Rng rng(9);
  const std::int64_t n = state.range(0);
  std::vector<double> scores(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = rng.uniform();
    labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.05) ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(auroc(scores, labels));
    benchmark::DoNotOptimize(auprc(scores, labels));
    benchmark::DoNotOptimize(fpr_at_tpr(scores, labels));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PixelMetrics)->Arg(1 << 16)->Arg(1 << 20);

void BM_ComponentMetrics(benchmark::State& state) {
  Rng rng(11);
  const int hw = static_cast<int>(state.range(0));
  MaskU8 gt({hw, hw});
  Tensor<float> scores({hw, hw});
  for (std::int64_t i = 0; i < gt.size(); ++i) {
    gt[i] = rng.bernoulli(0.03) ? 1 : 0;
    scores[i] = static_cast<float>(rng.uniform());
  }
  ComponentEvalConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(component_metrics(scores, gt, cfg));
  }
}
BENCHMARK(BM_ComponentMetrics)->Arg(64)->Arg(256);

void BM_FullPredict(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  BundleConfig cfg;
  PipelineBundle bundle = PipelineBundle::create(cfg, 13);
  const SceneSample s = make_sample(size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(s.image, bundle).final_map);
  }
}
BENCHMARK(BM_FullPredict)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
