// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the public C API in uvqa.h.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uvqa.h"

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string config_path;
  std::string config_text;  // raw key=value lines
};

int fail_with(int status) {
  std::fprintf(stderr, "error: %s (%s)\n", uvqa_last_error(), uvqa_status_name(status));
  return status;
}

// Returns and frees a JSON result string.
int print_json(int status, char* json) {
  if (status != UVQA_OK) return fail_with(status);
  std::printf("%s\n", json);
  uvqa_string_free(json);
  return 0;
}

void load_config(GlobalOpts& opts) {
  if (opts.config_path.empty()) return;
  std::ifstream in(opts.config_path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open config '%s'\n", opts.config_path.c_str());
    std::exit(UVQA_ERR_IO);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  opts.config_text = buffer.str();
  // seed/threads from the config act as defaults for every subcommand
  std::istringstream lines(opts.config_text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("seed=", 0) == 0) opts.seed = std::stoull(line.substr(5));
    if (line.rfind("threads=", 0) == 0) opts.threads = std::stoi(line.substr(8));
  }
}

int open_clip(const std::string& path, int width, int height, double fps,
              uvqa_clip** out) {
  if (width > 0 && height > 0) return uvqa_clip_open_raw(path.c_str(), width, height, fps, out);
  return uvqa_clip_open(path.c_str(), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uvqa - corrupted-reference video quality assessment toolkit"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "global RNG seed");
  app.add_option("--threads", global.threads, "worker threads for frame-level work");
  app.add_option("--config", global.config_path, "key=value configuration file");

  // features ---------------------------------------------------------------
  std::string clip_path;
  int feat_samples = 10, raw_w = 0, raw_h = 0;
  double raw_fps = 30.0;
  auto* features = app.add_subcommand("features", "SI / TI / CPBD content features");
  features->add_option("clip", clip_path, "input clip (Y4M)")->required();
  features->add_option("--samples", feat_samples, "frames sampled for the blur index");
  features->add_option("--width", raw_w, "raw I420 width");
  features->add_option("--height", raw_h, "raw I420 height");
  features->add_option("--fps", raw_fps, "raw I420 frame rate");

  // sample -----------------------------------------------------------------
  std::string sample_csv;
  int sample_n = 0, sample_bins = 5, sample_restarts = 4;
  bool sample_exact = false;
  auto* sample = app.add_subcommand("sample", "feature-uniform subset selection");
  sample->add_option("--features", sample_csv, "CSV with columns id,si,ti,cpbd")->required();
  sample->add_option("--n", sample_n, "subset size")->required();
  sample->add_option("--bins", sample_bins, "histogram bins per feature");
  sample->add_flag("--exact", sample_exact, "force exhaustive enumeration");
  sample->add_option("--restarts", sample_restarts, "local search restarts");

  // distort ----------------------------------------------------------------
  std::string distort_in, distort_out;
  int distort_count = 100;
  auto* distort = app.add_subcommand("distort", "two-stage distortion corpus builder");
  distort->add_option("--in", distort_in, "pristine PGM directory (omit for textures)");
  distort->add_option("--out", distort_out, "output directory")->required();
  distort->add_option("--count", distort_count, "number of distorted images");

  // fr-maps ----------------------------------------------------------------
  std::string maps_ref, maps_dist, maps_metric = "vif", maps_out;
  auto* frmaps = app.add_subcommand("fr-maps", "full-reference quality maps");
  frmaps->add_option("--ref", maps_ref, "reference clip")->required();
  frmaps->add_option("--dist", maps_dist, "distorted clip")->required();
  frmaps->add_option("--metric", maps_metric, "ssim | vif | mdsi | vmaf_style");
  frmaps->add_option("--out", maps_out, "output directory")->required();

  // train-generator ----------------------------------------------------------
  std::string gen_data, gen_out;
  int gen_epochs = 0, gen_batch = 0, gen_depth = 0, gen_width = 0;
  double gen_lr = 0.0, gen_alpha = -1.0;
  bool gen_paper = false;
  auto* train_gen = app.add_subcommand("train-generator", "train the quality-map generator");
  train_gen->add_option("--data", gen_data, "distorted corpus directory")->required();
  train_gen->add_option("--out", gen_out, "weights output (UVQA archive)")->required();
  train_gen->add_option("--epochs", gen_epochs, "training epochs (default 100)");
  train_gen->add_option("--lr", gen_lr, "learning rate (default 1e-3)");
  train_gen->add_option("--batch", gen_batch, "batch size (default 8)");
  train_gen->add_option("--alpha", gen_alpha, "SSIM/L1 loss mix (default 0.84)");
  train_gen->add_option("--depth", gen_depth, "residual blocks (default 4)");
  train_gen->add_option("--width", gen_width, "feature maps (default 16)");
  train_gen->add_flag("--paper-config", gen_paper, "use depth 10, width 64");

  // train-pooling ------------------------------------------------------------
  std::string pool_manifest, pool_gen, pool_out, pool_stack = "vif";
  int pool_epochs = 0, pool_batch = 0, pool_width = 0;
  int pool_frames = 30, pool_ds = 1, pool_ablation = 0;
  double pool_lr = 0.0;
  auto* train_pool = app.add_subcommand("train-pooling", "train the map-pooling regressor");
  train_pool->add_option("--manifest", pool_manifest, "corpus manifest JSON")->required();
  train_pool->add_option("--generator", pool_gen, "generator weights")->required();
  train_pool->add_option("--out", pool_out, "weights output")->required();
  train_pool->add_option("--stack", pool_stack, "ssim | vif | mdsi | vmaf_style");
  train_pool->add_option("--frames", pool_frames, "frames sampled per video");
  train_pool->add_option("--downsample", pool_ds, "map downsampling factor");
  train_pool->add_option("--epochs", pool_epochs, "training epochs (default 20)");
  train_pool->add_option("--lr", pool_lr, "learning rate (default 1e-4)");
  train_pool->add_option("--batch", pool_batch, "batch size (default 8)");
  train_pool->add_option("--width", pool_width, "trunk feature maps (default 16)");
  train_pool->add_option("--ablation", pool_ablation,
                         "0 full, 1 drop source maps, 2 drop transcoded maps");

  // predict ------------------------------------------------------------------
  std::string pred_ref, pred_dist, pred_gen, pred_pool;
  int pred_frames = 0;
  auto* predict = app.add_subcommand("predict", "score a transcoded clip");
  predict->add_option("--ref", pred_ref, "source clip")->required();
  predict->add_option("--dist", pred_dist, "transcoded clip")->required();
  predict->add_option("--generator", pred_gen, "generator weights")->required();
  predict->add_option("--pooling", pred_pool, "pooling weights")->required();
  predict->add_option("--frames", pred_frames, "frames sampled (default from weights)");

  // screen -------------------------------------------------------------------
  std::string screen_csv;
  auto* screen = app.add_subcommand("screen", "BT.500-style subject screening + MOS/DMOS");
  screen->add_option("--scores", screen_csv, "CSV: subject_id,presentation_id,score[,source_id,is_ref]")
      ->required();

  // fit ----------------------------------------------------------------------
  std::string fit_csv;
  auto* fit = app.add_subcommand("fit", "logistic fit and correlation report");
  fit->add_option("--data", fit_csv, "CSV with columns objective,mos")->required();

  // eval ---------------------------------------------------------------------
  std::string eval_manifest, eval_gen, eval_out, eval_stack, eval_ablation;
  int eval_repeats = 0, eval_epochs = 0, eval_frames = 0, eval_ds = 0;
  auto* eval = app.add_subcommand("eval", "split/train/select/test protocol");
  eval->add_option("--manifest", eval_manifest, "corpus manifest JSON")->required();
  eval->add_option("--generator", eval_gen, "generator weights")->required();
  eval->add_option("--out", eval_out, "report output directory");
  eval->add_option("--repeats", eval_repeats, "protocol repeats (default 20)");
  eval->add_option("--stack", eval_stack, "ssim | vif | mdsi | vmaf_style");
  eval->add_option("--ablation", eval_ablation, "none | no_source_maps | no_transcoded_maps");
  eval->add_option("--epochs", eval_epochs, "pooling epochs per repeat");
  eval->add_option("--frames", eval_frames, "frames sampled per video");
  eval->add_option("--downsample", eval_ds, "map downsampling factor");

  // report -------------------------------------------------------------------
  std::vector<std::string> report_inputs;
  std::string report_format = "csv", report_out;
  auto* report = app.add_subcommand("report", "convert report JSON to csv/plotdata");
  report->add_option("--report", report_inputs, "input report.json (repeatable)")->required();
  report->add_option("--format", report_format, "csv | plotdata | json");
  report->add_option("--out", report_out, "output path")->required();

  // demo-corpus ----------------------------------------------------------------
  std::string demo_out;
  int demo_sources = 12, demo_versions = 4, demo_frames = 10, demo_size = 64;
  auto* demo = app.add_subcommand("demo-corpus", "synthetic manifest corpus for end-to-end runs");
  demo->add_option("--out", demo_out, "output directory")->required();
  demo->add_option("--sources", demo_sources, "source clips");
  demo->add_option("--versions", demo_versions, "transcoded versions per source");
  demo->add_option("--frames", demo_frames, "frames per clip");
  demo->add_option("--size", demo_size, "clip edge length (even)");

  CLI11_PARSE(app, argc, argv);
  load_config(global);

  if (features->parsed()) {
    uvqa_clip* clip = nullptr;
    int status = open_clip(clip_path, raw_w, raw_h, raw_fps, &clip);
    if (status != UVQA_OK) return fail_with(status);
    uvqa_features_result result{};
    status = uvqa_clip_features(clip, feat_samples, &result);
    uvqa_clip_close(clip);
    if (status != UVQA_OK) return fail_with(status);
    std::printf("{\"si\":%.6f,\"ti\":%.6f,\"cpbd\":%.6f,\"flags\":%s}\n", result.si,
                result.ti, result.cpbd,
                result.cpbd_degenerate_frames > 0 ? "[\"cpbd_degenerate\"]" : "[]");
    return 0;
  }

  if (sample->parsed()) {
    char* json = nullptr;
    int status = uvqa_sample_csv(sample_csv.c_str(), sample_n, sample_bins,
                                 sample_exact ? 1 : -1, global.seed, sample_restarts,
                                 &json);
    return print_json(status, json);
  }

  if (distort->parsed()) {
    char* json = nullptr;
    int status = uvqa_distort_dir(distort_in.empty() ? nullptr : distort_in.c_str(),
                                  distort_out.c_str(), distort_count, global.seed,
                                  global.threads, &json);
    return print_json(status, json);
  }

  if (frmaps->parsed()) {
    char* json = nullptr;
    int status = uvqa_fr_maps(maps_ref.c_str(), maps_dist.c_str(), maps_metric.c_str(),
                              maps_out.c_str(), global.threads, &json);
    return print_json(status, json);
  }

  if (train_gen->parsed()) {
    uvqa_train_opts opts{};
    opts.learning_rate = gen_lr;
    opts.epochs = gen_epochs;
    opts.batch_size = gen_batch;
    opts.alpha = gen_alpha;
    opts.seed = global.seed;
    opts.depth = gen_depth;
    opts.width = gen_width;
    opts.paper_config = gen_paper ? 1 : 0;
    char* json = nullptr;
    int status = uvqa_train_generator(gen_data.c_str(), gen_out.c_str(), &opts, &json);
    return print_json(status, json);
  }

  if (train_pool->parsed()) {
    uvqa_train_opts opts{};
    opts.learning_rate = pool_lr;
    opts.epochs = pool_epochs;
    opts.batch_size = pool_batch;
    opts.alpha = -1.0;
    opts.seed = global.seed;
    opts.width = pool_width;
    char* json = nullptr;
    int status = uvqa_train_pooling(pool_manifest.c_str(), pool_gen.c_str(),
                                    pool_out.c_str(), &opts, pool_stack.c_str(),
                                    pool_frames, pool_ds, pool_ablation, &json);
    return print_json(status, json);
  }

  if (predict->parsed()) {
    double score = 0.0;
    int status = uvqa_predict(pred_ref.c_str(), pred_dist.c_str(), pred_gen.c_str(),
                              pred_pool.c_str(), pred_frames, &score);
    if (status != UVQA_OK) return fail_with(status);
    std::printf("{\"score\":%.6f}\n", score);
    return 0;
  }

  if (screen->parsed()) {
    char* json = nullptr;
    int status = uvqa_screen_csv(screen_csv.c_str(), &json);
    return print_json(status, json);
  }

  if (fit->parsed()) {
    char* json = nullptr;
    int status = uvqa_fit_csv(fit_csv.c_str(), &json);
    return print_json(status, json);
  }

  if (eval->parsed()) {
    std::string config = global.config_text;
    auto add_kv = [&](const std::string& key, const std::string& value) {
      if (!value.empty()) config += "\n" + key + "=" + value;
    };
    if (eval_repeats > 0) add_kv("repeats", std::to_string(eval_repeats));
    add_kv("stack", eval_stack);
    add_kv("ablation", eval_ablation);
    if (eval_epochs > 0) add_kv("epochs", std::to_string(eval_epochs));
    if (eval_frames > 0) add_kv("frame_count", std::to_string(eval_frames));
    if (eval_ds > 0) add_kv("downsample", std::to_string(eval_ds));
    if (global.threads > 1) add_kv("threads", std::to_string(global.threads));
    char* json = nullptr;
    int status = uvqa_run_experiment(eval_manifest.c_str(), eval_gen.c_str(),
                                     config.empty() ? nullptr : config.c_str(),
                                     global.seed,
                                     eval_out.empty() ? nullptr : eval_out.c_str(),
                                     &json);
    return print_json(status, json);
  }

  if (report->parsed()) {
    std::vector<const char*> paths;
    for (const auto& p : report_inputs) paths.push_back(p.c_str());
    int status = uvqa_report_convert(paths.data(), static_cast<int>(paths.size()),
                                     report_format.c_str(), report_out.c_str());
    if (status != UVQA_OK) return fail_with(status);
    std::printf("{\"out\":\"%s\"}\n", report_out.c_str());
    return 0;
  }

  if (demo->parsed()) {
    char* manifest = nullptr;
    int status = uvqa_make_demo_corpus(demo_out.c_str(), demo_sources, demo_versions,
                                       demo_frames, demo_size, global.seed, &manifest);
    if (status != UVQA_OK) return fail_with(status);
    std::printf("{\"manifest\":\"%s\"}\n", manifest);
    uvqa_string_free(manifest);
    return 0;
  }

  return 0;
}
