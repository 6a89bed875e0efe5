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

// Brute-force reference implementations used to check the library. These are
// written independently of the library code paths: direct pair counting,
// exhaustive threshold scans, neighborhood enumeration, and BFS flood fill.
// Keep them slow and obvious.

#ifndef SOTA_TESTS_ORACLES_HPP_
#define SOTA_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <set>
#include <vector>

#include "sota/metrics.hpp"
#include "sota/tensor.hpp"

namespace sota::oracle {

inline double auroc_pair_count(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& labels) {
  double num = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

inline double auprc_threshold_scan(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels) {
  std::set<double> uniq(scores.begin(), scores.end());
  std::vector<double> thresholds(uniq.rbegin(), uniq.rend());  // descending
  std::int64_t total_pos = 0;
  for (auto l : labels) total_pos += l ? 1 : 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] ? tp : fp)++;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

inline double fpr_at_tpr_threshold_scan(const std::vector<double>& scores,
                                        const std::vector<std::uint8_t>& labels,
                                        double tpr_target) {
  std::set<double> uniq(scores.begin(), scores.end());
  std::int64_t total_pos = 0, total_neg = 0;
  for (auto l : labels) (l ? total_pos : total_neg)++;
  double best = 1.0;
  for (double t : uniq) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) (labels[i] ? tp : fp)++;
    if (static_cast<double>(tp) / total_pos >= tpr_target)
      best = std::min(best, static_cast<double>(fp) / total_neg);
  }
  return best;
}

// Morphology by literal neighborhood enumeration under zero padding.
inline MaskU8 dilate_enum(const MaskU8& m, int k) {
  const int h = m.dim(0), w = m.dim(1), r = k / 2;
  MaskU8 out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int dy = -r; dy <= r && !v; ++dy)
        for (int dx = -r; dx <= r && !v; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && m.at2(yy, xx)) v = 1;
        }
      out.at2(y, x) = v;
    }
  return out;
}

inline MaskU8 erode_enum(const MaskU8& m, int k) {
  const int h = m.dim(0), w = m.dim(1), r = k / 2;
  MaskU8 out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 1;
      for (int dy = -r; dy <= r && v; ++dy)
        for (int dx = -r; dx <= r && v; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || !m.at2(yy, xx)) v = 0;
        }
      out.at2(y, x) = v;
    }
  return out;
}

inline MaskU8 refine_enum(const MaskU8& m, int k, int n, bool erode_first) {
  MaskU8 out = m;
  if (erode_first)
    for (int i = 0; i < n; ++i) out = erode_enum(out, k);
  for (int i = 0; i < n; ++i) out = dilate_enum(out, k);
  return out;
}

// BFS flood-fill components (independent of the union-find implementation).
inline std::vector<std::vector<std::int64_t>> components_bfs(const MaskU8& m,
                                                             int connectivity) {
  const int h = m.dim(0), w = m.dim(1);
  std::vector<char> seen(static_cast<std::size_t>(m.size()), 0);
  std::vector<std::vector<std::int64_t>> comps;
  const int dy4[] = {0, 0, 1, -1}, dx4[] = {1, -1, 0, 0};
  const int dy8[] = {0, 0, 1, -1, 1, 1, -1, -1}, dx8[] = {1, -1, 0, 0, 1, -1, 1, -1};
  const int* dy = connectivity == 8 ? dy8 : dy4;
  const int* dx = connectivity == 8 ? dx8 : dx4;
  const int nn = connectivity;
  for (std::int64_t start = 0; start < m.size(); ++start) {
    if (!m[start] || seen[static_cast<std::size_t>(start)]) continue;
    std::vector<std::int64_t> comp;
    std::deque<std::int64_t> q{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!q.empty()) {
      const std::int64_t i = q.front();
      q.pop_front();
      comp.push_back(i);
      const int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
      for (int d = 0; d < nn; ++d) {
        const int yy = y + dy[d], xx = x + dx[d];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const std::int64_t j = static_cast<std::int64_t>(yy) * w + xx;
        if (m[j] && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          q.push_back(j);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

struct ComponentOracleResult {
  double siou_mean = 0, ppv_mean = 0, f1_star = 0;
  std::vector<double> sious, ppvs;
};

// Set-arithmetic evaluation of the component metrics by pixel enumeration.
inline ComponentOracleResult component_metrics_enum(const Tensor<float>& score_map,
                                                    const MaskU8& gt_mask,
                                                    const ComponentEvalConfig& cfg) {
  const int h = gt_mask.dim(0), w = gt_mask.dim(1);
  MaskU8 pred({h, w});
  for (std::int64_t i = 0; i < pred.size(); ++i)
    pred[i] = score_map[i] > cfg.seg_threshold ? 1 : 0;
  auto keep_big = [&](std::vector<std::vector<std::int64_t>> comps) {
    std::vector<std::vector<std::int64_t>> out;
    for (auto& c : comps)
      if (static_cast<int>(c.size()) >= cfg.min_component_size) out.push_back(std::move(c));
    return out;
  };
  const auto gt_comps = keep_big(components_bfs(gt_mask, cfg.connectivity));
  const auto pr_comps = keep_big(components_bfs(pred, cfg.connectivity));

  auto contains = [](const std::vector<std::int64_t>& comp, std::int64_t px) {
    return std::binary_search(comp.begin(), comp.end(), px);
  };

  ComponentOracleResult r;
  std::vector<int> tp(cfg.tp_thresholds.size(), 0), fn(cfg.tp_thresholds.size(), 0),
      fp(cfg.tp_thresholds.size(), 0);

  for (std::size_t g = 0; g < gt_comps.size(); ++g) {
    // Union of predicted components that intersect this GT component.
    std::set<std::int64_t> matched_union;
    for (const auto& pc : pr_comps) {
      bool intersects = false;
      for (std::int64_t px : pc)
        if (contains(gt_comps[g], px)) {
          intersects = true;
          break;
        }
      if (intersects) matched_union.insert(pc.begin(), pc.end());
    }
    std::set<std::int64_t> uni(gt_comps[g].begin(), gt_comps[g].end());
    uni.insert(matched_union.begin(), matched_union.end());
    std::int64_t inter = 0;
    for (std::int64_t px : gt_comps[g])
      if (matched_union.count(px)) ++inter;
    // Remove pixels of the matched union claimed by other GT components.
    std::int64_t adjusted = static_cast<std::int64_t>(uni.size());
    for (std::int64_t px : matched_union) {
      for (std::size_t g2 = 0; g2 < gt_comps.size(); ++g2) {
        if (g2 == g) continue;
        if (contains(gt_comps[g2], px)) {
          --adjusted;
          break;
        }
      }
    }
    const double siou = adjusted > 0 ? static_cast<double>(inter) / adjusted : 0.0;
    r.sious.push_back(siou);
    for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k)
      (siou > cfg.tp_thresholds[k] ? tp[k] : fn[k])++;
  }

  for (const auto& pc : pr_comps) {
    std::int64_t in_gt = 0;
    for (std::int64_t px : pc)
      if (gt_mask[px]) ++in_gt;
    const double ppv = static_cast<double>(in_gt) / static_cast<double>(pc.size());
    r.ppvs.push_back(ppv);
    for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k)
      if (ppv <= cfg.tp_thresholds[k]) ++fp[k];
  }

  double f1_sum = 0;
  for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k) {
    const int den = 2 * tp[k] + fn[k] + fp[k];
    f1_sum += den > 0 ? 2.0 * tp[k] / den : 1.0;
  }
  r.f1_star = f1_sum / static_cast<double>(cfg.tp_thresholds.size());
  if (!r.sious.empty())
    r.siou_mean = std::accumulate(r.sious.begin(), r.sious.end(), 0.0) / r.sious.size();
  if (!r.ppvs.empty())
    r.ppv_mean = std::accumulate(r.ppvs.begin(), r.ppvs.end(), 0.0) / r.ppvs.size();
  return r;
}

}  // namespace sota::oracle

#endif  // SOTA_TESTS_ORACLES_HPP_
