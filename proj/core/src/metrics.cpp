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

#include "sota/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "sota/errors.hpp"

namespace sota {
namespace {

struct ScoredLabel {
  double score;
  std::uint8_t label;
};

std::vector<ScoredLabel> sorted_pairs(const std::vector<double>& scores,
                                      const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("pixel metrics: scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("pixel metrics: empty input");
  std::vector<ScoredLabel> v(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) v[i] = {scores[i], labels[i] ? std::uint8_t(1) : std::uint8_t(0)};
  std::sort(v.begin(), v.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.label < b.label;
  });
  return v;
}

void count_classes(const std::vector<ScoredLabel>& v, std::int64_t& pos, std::int64_t& neg) {
  pos = neg = 0;
  for (const auto& e : v) (e.label ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("pixel metrics: both classes must be present");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  const auto v = sorted_pairs(scores, labels);
  std::int64_t pos, neg;
  count_classes(v, pos, neg);
  double u = 0.0;
  std::int64_t neg_below = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    std::int64_t pg = 0, ng = 0;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].label ? pg : ng)++;
      ++j;
    }
    u += static_cast<double>(pg) * static_cast<double>(neg_below) +
         0.5 * static_cast<double>(pg) * static_cast<double>(ng);
    neg_below += ng;
    i = j;
  }
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auprc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  auto v = sorted_pairs(scores, labels);
  std::reverse(v.begin(), v.end());  // descending score
  std::int64_t pos = 0, neg = 0;
  count_classes(v, pos, neg);
  double ap = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    std::int64_t pg = 0, ng = 0;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].label ? pg : ng)++;
      ++j;
    }
    tp += pg;
    fp += ng;
    if (pg > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += precision * static_cast<double>(pg) / static_cast<double>(pos);
    }
    i = j;
  }
  return ap;
}

double fpr_at_tpr(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                  double tpr_target) {
  auto v = sorted_pairs(scores, labels);
  std::reverse(v.begin(), v.end());
  std::int64_t pos = 0, neg = 0;
  count_classes(v, pos, neg);
  // Sweep thresholds drawn from the score set, descending. Prediction is
  // positive when score >= threshold; TPR and FPR both grow monotonically,
  // so the first qualifying threshold attains the minimum FPR.
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j].score == v[i].score) {
      (v[j].label ? tp : fp)++;
      ++j;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    if (tpr >= tpr_target) return static_cast<double>(fp) / static_cast<double>(neg);
    i = j;
  }
  return 1.0;  // unreachable: the lowest threshold always reaches TPR == 1
}

void PixelMetricAccumulator::add_map(const Tensor<float>& scores, const MaskU8& labels) {
  if (scores.size() != labels.size())
    throw ShapeError("pixel metrics: score map and label map sizes differ");
  scores_.reserve(scores_.size() + static_cast<std::size_t>(scores.size()));
  labels_.reserve(labels_.size() + static_cast<std::size_t>(labels.size()));
  for (std::int64_t i = 0; i < scores.size(); ++i) {
    scores_.push_back(static_cast<double>(scores[i]));
    labels_.push_back(labels[i] ? 1 : 0);
  }
}

void PixelMetricAccumulator::canonicalize() const {
  if (sorted_) return;
  std::vector<std::size_t> idx(scores_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores_[a] != scores_[b]) return scores_[a] < scores_[b];
    return labels_[a] < labels_[b];
  });
  std::vector<double> s(scores_.size());
  std::vector<std::uint8_t> l(labels_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    s[i] = scores_[idx[i]];
    l[i] = labels_[idx[i]];
  }
  scores_ = std::move(s);
  labels_ = std::move(l);
  sorted_ = true;
}

double PixelMetricAccumulator::auroc() const {
  canonicalize();
  return sota::auroc(scores_, labels_);
}
double PixelMetricAccumulator::auprc() const {
  canonicalize();
  return sota::auprc(scores_, labels_);
}
double PixelMetricAccumulator::fpr_at_95() const {
  canonicalize();
  return sota::fpr_at_tpr(scores_, labels_, 0.95);
}

// ---------------------------------------------------------------------------
// Connected components
// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return static_cast<int>(parent.size()) - 1;
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ComponentList connected_components(const MaskU8& mask, int connectivity, int min_size) {
  if (connectivity != 4 && connectivity != 8)
    throw ConfigError("connected_components: connectivity must be 4 or 8");
  const int h = mask.dim(0), w = mask.dim(1);
  ComponentList out;
  out.labels = Tensor<std::int32_t>({h, w});
  Tensor<std::int32_t> provisional({h, w});
  provisional.fill(-1);

  UnionFind uf;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at2(y, x)) continue;
      int label = -1;
      auto consider = [&](int yy, int xx) {
        if (yy < 0 || xx < 0 || xx >= w) return;
        const int n = provisional.at2(yy, xx);
        if (n < 0) return;
        if (label < 0)
          label = n;
        else
          uf.unite(label, n);
      };
      consider(y, x - 1);
      consider(y - 1, x);
      if (connectivity == 8) {
        consider(y - 1, x - 1);
        consider(y - 1, x + 1);
      }
      if (label < 0) label = uf.make();
      provisional.at2(y, x) = label;
    }
  }

  // Resolve to contiguous ids in raster order of first appearance.
  std::vector<int> remap(uf.parent.size(), 0);
  int next_id = 0;
  std::vector<int> sizes;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int p = provisional.at2(y, x);
      if (p < 0) continue;
      const int root = uf.find(p);
      if (remap[static_cast<std::size_t>(root)] == 0) {
        remap[static_cast<std::size_t>(root)] = ++next_id;
        sizes.push_back(0);
      }
      const int id = remap[static_cast<std::size_t>(root)];
      out.labels.at2(y, x) = id;
      ++sizes[static_cast<std::size_t>(id - 1)];
    }

  if (min_size > 1) {
    std::vector<int> keep(sizes.size() + 1, 0);
    int kept = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i)
      keep[i + 1] = sizes[i] >= min_size ? ++kept : 0;
    std::vector<int> new_sizes(static_cast<std::size_t>(kept), 0);
    for (std::int64_t i = 0; i < out.labels.size(); ++i) {
      const int id = out.labels[i];
      out.labels[i] = id > 0 ? keep[static_cast<std::size_t>(id)] : 0;
      if (out.labels[i] > 0) ++new_sizes[static_cast<std::size_t>(out.labels[i] - 1)];
    }
    sizes = std::move(new_sizes);
  }
  out.count = static_cast<int>(sizes.size());
  out.sizes = std::move(sizes);
  return out;
}

// ---------------------------------------------------------------------------
// Component tallies
// ---------------------------------------------------------------------------

void ComponentEvalConfig::validate() const {
  if (connectivity != 4 && connectivity != 8)
    throw ConfigError("eval: connectivity must be 4 or 8");
  if (min_component_size < 1) throw ConfigError("eval: min_component_size must be >= 1");
  if (tp_thresholds.empty()) throw ConfigError("eval: tp_thresholds must be nonempty");
  for (std::size_t i = 0; i < tp_thresholds.size(); ++i) {
    if (tp_thresholds[i] <= 0.0 || tp_thresholds[i] >= 1.0)
      throw ConfigError("eval: tp_thresholds must lie in (0,1)");
    if (i > 0 && tp_thresholds[i] <= tp_thresholds[i - 1])
      throw ConfigError("eval: tp_thresholds must be strictly increasing");
  }
}

void ComponentTallies::merge(const ComponentTallies& other) {
  gt_sious.insert(gt_sious.end(), other.gt_sious.begin(), other.gt_sious.end());
  pred_ppvs.insert(pred_ppvs.end(), other.pred_ppvs.begin(), other.pred_ppvs.end());
  if (tp.empty()) {
    tp = other.tp;
    fn = other.fn;
    fp = other.fp;
    return;
  }
  for (std::size_t i = 0; i < tp.size(); ++i) {
    tp[i] += other.tp[i];
    fn[i] += other.fn[i];
    fp[i] += other.fp[i];
  }
}

ComponentTallies component_tallies(const Tensor<float>& score_map, const MaskU8& gt_mask,
                                   const ComponentEvalConfig& cfg) {
  cfg.validate();
  if (score_map.size() != gt_mask.size())
    throw ShapeError("component metrics: score/gt shape mismatch");
  const int h = gt_mask.dim(0), w = gt_mask.dim(1);

  MaskU8 pred_mask({h, w});
  for (std::int64_t i = 0; i < pred_mask.size(); ++i)
    pred_mask[i] = score_map[i] > cfg.seg_threshold ? 1 : 0;

  const ComponentList pred = connected_components(pred_mask, cfg.connectivity,
                                                  cfg.min_component_size);
  const ComponentList gt = connected_components(gt_mask, cfg.connectivity,
                                                cfg.min_component_size);

  // Overlap counts: O[g][p] = |gt component g intersect pred component p|.
  std::vector<std::vector<int>> overlap(static_cast<std::size_t>(gt.count + 1),
                                        std::vector<int>(static_cast<std::size_t>(pred.count + 1), 0));
  std::vector<int> pred_in_any_gt(static_cast<std::size_t>(pred.count + 1), 0);
  for (std::int64_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i], p = pred.labels[i];
    ++overlap[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    if (p > 0 && g > 0) ++pred_in_any_gt[static_cast<std::size_t>(p)];
  }

  ComponentTallies t;
  t.tp.assign(cfg.tp_thresholds.size(), 0);
  t.fn.assign(cfg.tp_thresholds.size(), 0);
  t.fp.assign(cfg.tp_thresholds.size(), 0);

  for (int g = 1; g <= gt.count; ++g) {
    const auto& row = overlap[static_cast<std::size_t>(g)];
    std::int64_t inter = 0, matched_pred_total = 0, excluded = 0;
    for (int p = 1; p <= pred.count; ++p) {
      const int o = row[static_cast<std::size_t>(p)];
      if (o == 0) continue;
      inter += o;
      matched_pred_total += pred.sizes[static_cast<std::size_t>(p - 1)];
      // Pixels of this predicted component claimed by *other* GT components.
      excluded += pred_in_any_gt[static_cast<std::size_t>(p)] - o;
    }
    const std::int64_t gt_size = gt.sizes[static_cast<std::size_t>(g - 1)];
    const std::int64_t adjusted_union = gt_size + matched_pred_total - inter - excluded;
    const double siou = adjusted_union > 0
                            ? static_cast<double>(inter) / static_cast<double>(adjusted_union)
                            : 0.0;
    t.gt_sious.push_back(siou);
    for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k)
      (siou > cfg.tp_thresholds[k] ? t.tp[k] : t.fn[k])++;
  }

  for (int p = 1; p <= pred.count; ++p) {
    std::int64_t in_gt = 0;
    for (int g = 1; g <= gt.count; ++g) in_gt += overlap[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    const double ppv =
        static_cast<double>(in_gt) / static_cast<double>(pred.sizes[static_cast<std::size_t>(p - 1)]);
    t.pred_ppvs.push_back(ppv);
    for (std::size_t k = 0; k < cfg.tp_thresholds.size(); ++k)
      if (ppv <= cfg.tp_thresholds[k]) ++t.fp[k];
  }
  return t;
}

ComponentMetrics finalize_component_metrics(const ComponentTallies& tallies,
                                            const ComponentEvalConfig& cfg) {
  ComponentMetrics m;
  const std::size_t nt = cfg.tp_thresholds.size();
  m.f1_per_threshold.assign(nt, 0.0);
  m.degenerate_empty = tallies.gt_sious.empty() && tallies.pred_ppvs.empty();
  if (m.degenerate_empty) {
    // No GT and no predictions anywhere: report perfect agreement, flagged.
    m.siou_mean = m.ppv_mean = m.f1_star = 1.0;
    m.f1_per_threshold.assign(nt, 1.0);
    return m;
  }
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    const int tp = tallies.tp.empty() ? 0 : tallies.tp[k];
    const int fn = tallies.fn.empty() ? 0 : tallies.fn[k];
    const int fp = tallies.fp.empty() ? 0 : tallies.fp[k];
    const int den = 2 * tp + fn + fp;
    const double f1 = den > 0 ? 2.0 * tp / den : 1.0;
    m.f1_per_threshold[k] = f1;
    f1_sum += f1;
  }
  m.f1_star = f1_sum / static_cast<double>(nt);
  if (!tallies.gt_sious.empty())
    m.siou_mean = std::accumulate(tallies.gt_sious.begin(), tallies.gt_sious.end(), 0.0) /
                  static_cast<double>(tallies.gt_sious.size());
  if (!tallies.pred_ppvs.empty())
    m.ppv_mean = std::accumulate(tallies.pred_ppvs.begin(), tallies.pred_ppvs.end(), 0.0) /
                 static_cast<double>(tallies.pred_ppvs.size());
  return m;
}

ComponentMetrics component_metrics(const Tensor<float>& score_map, const MaskU8& gt_mask,
                                   const ComponentEvalConfig& cfg) {
  return finalize_component_metrics(component_tallies(score_map, gt_mask, cfg), cfg);
}

}  // namespace sota
