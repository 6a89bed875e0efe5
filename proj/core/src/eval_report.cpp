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

#include "sota/eval_report.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "sota/errors.hpp"

namespace sota {

using nlohmann::json;

std::string EvalReport::to_json_string() const {
  json j;
  j["auroc"] = auroc;
  j["auprc"] = auprc;
  j["fpr_at_95tpr"] = fpr_at_95tpr;
  j["siou_mean"] = siou_mean;
  j["ppv_mean"] = ppv_mean;
  j["f1_star"] = f1_star;
  j["component_degenerate"] = component_degenerate;
  j["num_samples"] = num_samples;
  j["num_pixels"] = num_pixels;
  j["tp_thresholds"] = tp_thresholds;
  j["f1_per_threshold"] = f1_per_threshold;
  json per = json::array();
  for (const auto& p : per_image) {
    per.push_back({{"index", p.index},
                   {"gt_components", p.gt_components},
                   {"pred_components", p.pred_components},
                   {"tp", p.tp},
                   {"fn", p.fn},
                   {"fp", p.fp}});
  }
  j["per_image"] = per;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("eval report: malformed JSON: ") + e.what());
  }
  EvalReport r;
  r.auroc = j.at("auroc").get<double>();
  r.auprc = j.at("auprc").get<double>();
  r.fpr_at_95tpr = j.at("fpr_at_95tpr").get<double>();
  r.siou_mean = j.at("siou_mean").get<double>();
  r.ppv_mean = j.at("ppv_mean").get<double>();
  r.f1_star = j.at("f1_star").get<double>();
  r.component_degenerate = j.at("component_degenerate").get<bool>();
  r.num_samples = j.at("num_samples").get<std::int64_t>();
  r.num_pixels = j.at("num_pixels").get<std::int64_t>();
  r.tp_thresholds = j.at("tp_thresholds").get<std::vector<double>>();
  r.f1_per_threshold = j.at("f1_per_threshold").get<std::vector<double>>();
  for (const auto& p : j.at("per_image")) {
    PerImage per;
    per.index = p.at("index").get<std::int64_t>();
    per.gt_components = p.at("gt_components").get<int>();
    per.pred_components = p.at("pred_components").get<int>();
    per.tp = p.at("tp").get<std::vector<int>>();
    per.fn = p.at("fn").get<std::vector<int>>();
    per.fp = p.at("fp").get<std::vector<int>>();
    r.per_image.push_back(std::move(per));
  }
  return r;
}

void EvalReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("eval report: cannot write " + path.string());
  out << to_json_string();
}

EvalReport EvalReport::read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("eval report: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

void EvalReport::write_csv(const std::filesystem::path& path,
                           const std::string& row_label) const {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("eval report: cannot write " + path.string());
  out << "Method,AuROC,AuPRC,FPR@95,sIoU,PPV,F1*\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", row_label.c_str(),
                auroc, auprc, fpr_at_95tpr, siou_mean, ppv_mean, f1_star);
  out << buf;
}

}  // namespace sota
