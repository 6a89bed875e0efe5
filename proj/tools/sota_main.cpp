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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sota/base_segmentor.hpp"
#include "sota/bench_runner.hpp"
#include "sota/checkpoint.hpp"
#include "sota/errors.hpp"
#include "sota/pipeline.hpp"
#include "sota/run_config.hpp"
#include "sota/tensor_file.hpp"
#include "sota/threading.hpp"
#include "sota/training.hpp"
#include "sota/visualize.hpp"

namespace fs = std::filesystem;
using namespace sota;

namespace {

constexpr const char* kExitCodeDoc =
    "Exit codes: 0 ok, 1 internal error, 2 config/usage error, "
    "3 missing input, 4 dimension mismatch, 5 I/O failure, 6 training diverged.";

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool overwrite = false;
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
  cmd->add_option("--config", args.config_path, "Run configuration (JSON)");
  cmd->add_option("--seed", args.seed, "Override every seed in the configuration");
  if (needs_out)
    cmd->add_option("--out", args.out, "Output directory")->required();
  cmd->add_flag("--overwrite", args.overwrite, "Allow writing into a non-empty directory");
  cmd->add_flag("--paper-scale", args.paper_scale,
                "Appendix-scale profile: 256x256 input, 256-dim features, 15x15 kernel");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg =
      args.config_path.empty() ? RunConfig{} : RunConfig::from_json_file(args.config_path);
  if (args.config_path.empty()) cfg.finalize();
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.synth.seed = *args.seed;
    cfg.train_base.seed = *args.seed;
    cfg.train_sota.seed = *args.seed;
    cfg.finalize();
  }
  if (args.paper_scale) cfg.apply_paper_scale();
  return cfg;
}

void prepare_out_dir(const fs::path& out, bool overwrite) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!overwrite)
      throw ConfigError("output directory '" + out.string() +
                        "' is not empty; rerun with --overwrite");
    std::error_code ec;
    fs::remove_all(out, ec);  // replace, so reruns leave no stale files
    if (ec) throw IoError("cannot clear output directory " + out.string());
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
}

void write_loss_curve(const fs::path& path, const TrainCurve& curve) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, static_cast<double>(curve.loss[i]));
    out << buf;
  }
}

Tensor<float> image_from_png(const fs::path& path) {
  const ImageU8 img = read_png(path);
  if (img.channels != 3) throw ShapeError("predict: input image must be RGB: " + path.string());
  Tensor<float> t({3, img.height, img.width});
  const std::int64_t hw = static_cast<std::int64_t>(img.height) * img.width;
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      t[c * hw + i] = img.pixels[static_cast<std::size_t>(i) * 3 + c] / 255.0f;
  return t;
}

int cmd_synth(const CommonArgs& common, std::int64_t count) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const DatasetManifest manifest = synthesize_dataset(cfg.synth, count, common.out);
  std::cout << "synthesized " << manifest.count << " samples into " << common.out << "\n";
  return 0;
}

int cmd_train_base(const CommonArgs& common, const std::string& data) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const Dataset dataset = load_dataset(data);

  SegmentorConfig<float> seg_cfg;
  seg_cfg.num_classes = cfg.synth.num_classes;
  BaseSegmentor<float> segmentor(seg_cfg, Rng(cfg.seed).split(1));
  const TrainCurve curve = train_base(dataset, cfg.train_base, segmentor);

  CheckpointMeta meta;
  meta.component = "base_segmentor";
  meta.step = cfg.train_base.max_iter;
  meta.config_hash = cfg.hash();
  save_checkpoint(fs::path(common.out) / "base_segmentor", segmentor.params(), {}, meta);
  write_loss_curve(fs::path(common.out) / "loss_curve.csv", curve);
  std::cout << "trained base segmentor for " << cfg.train_base.max_iter
            << " iterations; final loss "
            << (curve.loss.empty() ? 0.0f : curve.loss.back()) << "\n";
  return 0;
}

int cmd_train_sota(const CommonArgs& common, const std::string& data,
                   const std::string& base_ckpt, const std::string& val_data) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const Dataset dataset = load_dataset(data);
  std::optional<Dataset> val;
  if (!val_data.empty()) val = load_dataset(val_data);

  PipelineBundle bundle = PipelineBundle::create(cfg.bundle, cfg.seed);
  bundle.lora = cfg.lora;
  load_checkpoint(base_ckpt, bundle.base.params(), {});

  TrainCurve curve;
  try {
    curve = train_sota(dataset, cfg.train_sota, bundle, val ? &*val : nullptr);
  } catch (const TrainingDiverged&) {
    // Keep the last good state on disk, then resurface the failure.
    bundle.save(fs::path(common.out) / "bundle", cfg.hash());
    throw;
  }
  bundle.save(fs::path(common.out) / "bundle", cfg.hash());
  write_loss_curve(fs::path(common.out) / "loss_curve.csv", curve);
  for (std::size_t i = 0; i < curve.eval_reports.size(); ++i) {
    const fs::path dir = fs::path(common.out) / "val_reports";
    fs::create_directories(dir);
    curve.eval_reports[i].write_json(
        dir / ("iter_" + std::to_string(curve.eval_iters[i]) + ".json"));
  }
  std::cout << "trained pipeline for " << cfg.train_sota.max_iter
            << " iterations; bundle written to " << (fs::path(common.out) / "bundle")
            << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& data, const std::string& bundle_dir,
             const std::string& source, double oracle_confusion, bool save_maps) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const Dataset dataset = load_dataset(data);

  EvalReport report;
  std::string label;
  if (source == "oracle") {
    label = "oracle";
    report = evaluate_scores(dataset, cfg.eval, [&](const SceneSample& s, std::int64_t i) {
      const auto logits = oracle_segmentor<float>(s, oracle_confusion, cfg.synth.num_classes,
                                                  Rng::mix(cfg.seed, i));
      return ood_score(logits, cfg.bundle.normalization).values;
    });
  } else {
    if (bundle_dir.empty())
      throw ConfigError("eval: --bundle is required unless --source oracle");
    const PipelineBundle bundle = PipelineBundle::load(bundle_dir);
    const ScoreSource src =
        source == "raw" ? ScoreSource::kRawAnomaly : ScoreSource::kFullPipeline;
    label = source == "raw" ? "raw_anomaly" : "sota";
    report = batch_evaluate(dataset, bundle, cfg.eval, src);
    if (save_maps) {
      const fs::path maps = fs::path(common.out) / "score_maps";
      fs::create_directories(maps);
      for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        const Tensor<float> m = src == ScoreSource::kRawAnomaly
                                    ? ood_score(bundle.base.forward(ag::constant(s.image))->value,
                                                bundle.config.normalization)
                                          .values
                                    : predict(s.image, bundle).final_map;
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%06zu.final.sota", i);
        write_tensor_file(maps / stem, m);
      }
    }
  }
  report.write_json(fs::path(common.out) / "report.json");
  report.write_csv(fs::path(common.out) / "report.csv", label);
  std::cout << "AuROC " << report.auroc << "  AuPRC " << report.auprc << "  FPR@95 "
            << report.fpr_at_95tpr << "  sIoU " << report.siou_mean << "  PPV "
            << report.ppv_mean << "  F1* " << report.f1_star << "\n";
  return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& input,
                const std::string& bundle_dir) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const PipelineBundle bundle = PipelineBundle::load(bundle_dir);

  std::vector<std::pair<std::string, Tensor<float>>> images;
  if (fs::is_directory(input)) {
    const DatasetManifest manifest = read_manifest(input);
    for (const auto& stem : manifest.sample_stems) {
      const fs::path img = fs::path(input) / (stem + ".image.png");
      images.emplace_back(fs::path(stem).filename().string(), image_from_png(img));
    }
  } else {
    images.emplace_back(fs::path(input).stem().string(), image_from_png(input));
  }

  for (const auto& [stem, image] : images) {
    const PredictOutputs out = predict(image, bundle);
    const fs::path base = fs::path(common.out) / stem;
    write_png(fs::path(base.string() + ".image.png"), tensor_to_image(image));
    write_tensor_file(fs::path(base.string() + ".final.sota"), out.final_map);
    write_tensor_file(fs::path(base.string() + ".ytilde.sota"), out.anomaly.values);
    write_tensor_file(fs::path(base.string() + ".gated.sota"), out.gated);
    write_tensor_file(fs::path(base.string() + ".gate.sota"), out.gate_map);
    write_tensor_file(fs::path(base.string() + ".attention.sota"), out.attention);
    write_tensor_file(fs::path(base.string() + ".roadmask.sota"), out.road_mask_refined);
  }
  std::cout << "wrote predictions for " << images.size() << " image(s) to " << common.out
            << "\n";
  return 0;
}

int cmd_viz(const std::string& pred_dir, const std::string& out, bool overwrite) {
  prepare_out_dir(out, overwrite);
  int rendered = 0;
  std::vector<fs::path> score_files;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 11 && name.substr(name.size() - 11) == ".final.sota")
      score_files.push_back(entry.path());
  }
  std::sort(score_files.begin(), score_files.end());
  if (score_files.empty())
    throw MissingInputError("viz: no *.final.sota score maps under " + pred_dir);
  for (const auto& path : score_files) {
    const Tensor<float> score = read_tensor_file_f32(path);
    const std::string stem =
        path.filename().string().substr(0, path.filename().string().size() - 11);
    const ImageU8 heat = render_heatmap(score);
    write_png(fs::path(out) / (stem + ".heatmap.png"), heat);
    const fs::path image_png = fs::path(pred_dir) / (stem + ".image.png");
    if (fs::exists(image_png)) {
      const ImageU8 image = read_png(image_png);
      const ImageU8 panel = hstack({image, heat, render_overlay(image, score)});
      write_png(fs::path(out) / (stem + ".panel.png"), panel);
    }
    ++rendered;
  }
  std::cout << "rendered " << rendered << " heatmap(s) to " << out << "\n";
  return 0;
}

int cmd_bench(const CommonArgs& common, const std::string& data, const std::string& bundle_dir,
              int repetitions) {
  RunConfig cfg = load_config(common);
  prepare_out_dir(common.out, common.overwrite);
  cfg.echo_to(common.out);
  const Dataset dataset = load_dataset(data);
  const PipelineBundle bundle = PipelineBundle::load(bundle_dir);
  const BenchReport report = run_bench(dataset, bundle, repetitions);
  std::ofstream out(fs::path(common.out) / "bench.json", std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("bench: cannot write bench.json");
  out << report.to_json_string();
  std::cout << report.to_json_string();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Road-anomaly segmentation pipeline: synthetic outlier-exposure data, a "
      "closed-set base segmentor, anomaly-guided feature fusion, road-prior "
      "prompting, a LoRA-adapted mask decoder, and the evaluation stack.\n" +
      std::string(kExitCodeDoc)};
  app.require_subcommand(1);

  CommonArgs synth_args;
  std::int64_t synth_count = 10;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene dataset");
  add_common(synth, synth_args);
  synth->add_option("--count", synth_count, "Number of samples")->required();

  CommonArgs tb_args;
  std::string tb_data;
  auto* tb = app.add_subcommand("train-base", "Train the closed-set base segmentor");
  add_common(tb, tb_args);
  tb->add_option("--data", tb_data, "Dataset directory")->required();

  CommonArgs ts_args;
  std::string ts_data, ts_base, ts_val;
  auto* ts = app.add_subcommand("train-sota", "Train fusion, prompt, and decoder adapters");
  add_common(ts, ts_args);
  ts->add_option("--data", ts_data, "Training dataset directory")->required();
  ts->add_option("--base-ckpt", ts_base, "Base segmentor checkpoint directory")->required();
  ts->add_option("--val-data", ts_val, "Validation dataset for periodic reports");

  CommonArgs ev_args;
  std::string ev_data, ev_bundle, ev_source = "full";
  double ev_oracle_confusion = 0.0;
  bool ev_save_maps = false;
  auto* ev = app.add_subcommand("eval", "Evaluate scores over a dataset");
  add_common(ev, ev_args);
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--bundle", ev_bundle, "Trained pipeline bundle directory");
  ev->add_option("--source", ev_source, "Score source: full | raw | oracle")
      ->check(CLI::IsMember({"full", "raw", "oracle"}));
  ev->add_option("--oracle-confusion", ev_oracle_confusion,
                 "Confusion rate for --source oracle");
  ev->add_flag("--save-maps", ev_save_maps, "Also write per-sample score maps");

  CommonArgs pr_args;
  std::string pr_input, pr_bundle;
  auto* pr = app.add_subcommand("predict", "Run the pipeline and dump maps + intermediates");
  add_common(pr, pr_args);
  pr->add_option("--input", pr_input, "Input image (PNG) or dataset directory")->required();
  pr->add_option("--bundle", pr_bundle, "Trained pipeline bundle directory")->required();

  std::string viz_pred, viz_out;
  bool viz_overwrite = false;
  auto* vz = app.add_subcommand("viz", "Render heatmaps and overlay panels");
  vz->add_option("--pred", viz_pred, "Prediction directory (from predict/eval)")->required();
  vz->add_option("--out", viz_out, "Output directory")->required();
  vz->add_flag("--overwrite", viz_overwrite, "Allow writing into a non-empty directory");

  CommonArgs bn_args;
  std::string bn_data, bn_bundle;
  int bn_reps = 5;
  auto* bn = app.add_subcommand("bench", "Time base-only vs full-pipeline inference");
  add_common(bn, bn_args);
  bn->add_option("--data", bn_data, "Dataset directory")->required();
  bn->add_option("--bundle", bn_bundle, "Trained pipeline bundle directory")->required();
  bn->add_option("--repetitions", bn_reps, "Timed passes over the dataset (>= 3)");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(synth_args, synth_count);
    if (tb->parsed()) return cmd_train_base(tb_args, tb_data);
    if (ts->parsed()) return cmd_train_sota(ts_args, ts_data, ts_base, ts_val);
    if (ev->parsed())
      return cmd_eval(ev_args, ev_data, ev_bundle, ev_source, ev_oracle_confusion,
                      ev_save_maps);
    if (pr->parsed()) return cmd_predict(pr_args, pr_input, pr_bundle);
    if (vz->parsed()) return cmd_viz(viz_pred, viz_out, viz_overwrite);
    if (bn->parsed()) return cmd_bench(bn_args, bn_data, bn_bundle, bn_reps);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const MissingInputError& e) {
    std::cerr << "error: missing-input: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "error: shape: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 5;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: diverged: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
