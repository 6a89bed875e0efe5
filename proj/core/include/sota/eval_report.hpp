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

#ifndef SOTA_EVAL_REPORT_HPP_
#define SOTA_EVAL_REPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sota/metrics.hpp"

namespace sota {

/// Dataset-level evaluation results. Pixel metrics pool all pixels across
/// the dataset; component metrics aggregate per-image tallies.
struct EvalReport {
  double auroc = 0;
  double auprc = 0;
  double fpr_at_95tpr = 0;
  double siou_mean = 0;
  double ppv_mean = 0;
  double f1_star = 0;
  bool component_degenerate = false;  // no GT and no predicted components
  std::int64_t num_samples = 0;
  std::int64_t num_pixels = 0;

  struct PerImage {
    std::int64_t index = 0;
    int gt_components = 0;
    int pred_components = 0;
    std::vector<int> tp, fn, fp;  // per tp_threshold
  };
  std::vector<double> tp_thresholds;
  std::vector<double> f1_per_threshold;
  std::vector<PerImage> per_image;

  std::string to_json_string() const;
  static EvalReport from_json_string(const std::string& text);
  void write_json(const std::filesystem::path& path) const;
  static EvalReport read_json(const std::filesystem::path& path);

  /// One-row CSV mirroring the benchmark table layout
  /// (AuROC, AuPRC, FPR@95, sIoU, PPV, F1*).
  void write_csv(const std::filesystem::path& path, const std::string& row_label) const;
};

}  // namespace sota

#endif  // SOTA_EVAL_REPORT_HPP_
