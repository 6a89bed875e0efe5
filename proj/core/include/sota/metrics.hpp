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

#ifndef SOTA_METRICS_HPP_
#define SOTA_METRICS_HPP_

#include <cstdint>
#include <vector>

#include "sota/tensor.hpp"

namespace sota {

// ---------------------------------------------------------------------------
// Pixel-level ranking metrics. Exact sort-based algorithms (ties grouped),
// no histogram binning, so brute-force oracles can be matched to 1e-9.
// Labels: 1 = OOD (positive class).
// ---------------------------------------------------------------------------

/// Mann-Whitney AuROC: P(random positive outranks random negative), ties 1/2.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Average precision with step interpolation; tied scores form one group.
double auprc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Minimum FPR over thresholds drawn from the score set (prediction positive
/// when score >= threshold) subject to TPR >= tpr_target.
double fpr_at_tpr(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels,
                  double tpr_target = 0.95);

/// Streaming pool for dataset-level pixel metrics; pairs are canonically
/// sorted before evaluation so results are independent of insert order.
class PixelMetricAccumulator {
 public:
  void add(double score, std::uint8_t label) {
    scores_.push_back(score);
    labels_.push_back(label);
  }
  void add_map(const Tensor<float>& scores, const MaskU8& labels);

  double auroc() const;
  double auprc() const;
  double fpr_at_95() const;
  std::int64_t size() const { return static_cast<std::int64_t>(scores_.size()); }

 private:
  void canonicalize() const;
  mutable std::vector<double> scores_;
  mutable std::vector<std::uint8_t> labels_;
  mutable bool sorted_ = false;
};

// ---------------------------------------------------------------------------
// Component-level metrics (SMIYC-style sIoU / PPV / F1*).
// ---------------------------------------------------------------------------

struct ComponentEvalConfig {
  double seg_threshold = 0.5;  // binarize score maps: positive when score > threshold
  int connectivity = 8;        // 4 or 8
  std::vector<double> tp_thresholds = {0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
                                       0.55, 0.60, 0.65, 0.70, 0.75};
  int min_component_size = 1;

  void validate() const;
};

struct ComponentList {
  Tensor<std::int32_t> labels;  // [H,W], 0 = background, 1..n component ids
  int count = 0;
  std::vector<int> sizes;  // per id, 1-based -> sizes[id-1]
};

/// Two-pass union-find labeling; components below min_size are dropped and
/// ids are renumbered contiguously in raster-scan order of first touch.
ComponentList connected_components(const MaskU8& mask, int connectivity, int min_size = 1);

/// Per-image tallies; dataset-level values come from summing tallies.
struct ComponentTallies {
  std::vector<double> gt_sious;    // one per GT component
  std::vector<double> pred_ppvs;   // one per predicted component
  std::vector<int> tp;             // per tp_threshold
  std::vector<int> fn;
  std::vector<int> fp;

  void merge(const ComponentTallies& other);
};

ComponentTallies component_tallies(const Tensor<float>& score_map, const MaskU8& gt_mask,
                                   const ComponentEvalConfig& cfg);

struct ComponentMetrics {
  double siou_mean = 0;
  double ppv_mean = 0;
  double f1_star = 0;
  std::vector<double> f1_per_threshold;
  // True when there were no GT and no predicted components anywhere; the
  // convention then reports (1, 1, 1).
  bool degenerate_empty = false;
};

ComponentMetrics finalize_component_metrics(const ComponentTallies& tallies,
                                            const ComponentEvalConfig& cfg);

/// Single-image convenience wrapper: tallies + finalize.
ComponentMetrics component_metrics(const Tensor<float>& score_map, const MaskU8& gt_mask,
                                   const ComponentEvalConfig& cfg);

}  // namespace sota

#endif  // SOTA_METRICS_HPP_
