// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa.h"

#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include <json.hpp>

#include "uvqa/archive.hpp"
#include "uvqa/distort.hpp"
#include "uvqa/experiment.hpp"
#include "uvqa/features.hpp"
#include "uvqa/media.hpp"
#include "uvqa/metrics.hpp"
#include "uvqa/models.hpp"
#include "uvqa/sampler.hpp"
#include "uvqa/stats.hpp"

using nlohmann::json;

namespace {

thread_local std::string t_last_error;

int set_error(uvqa_status status, const std::string& message) {
  t_last_error = message;
  return status;
}

int from_exception() {
  try {
    throw;
  } catch (const uvqa::Error& e) {
    return set_error(static_cast<uvqa_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::exception& e) {
    return set_error(UVQA_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(UVQA_ERR_INTERNAL, "unknown error");
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return UVQA_OK;
  } catch (...) {
    return from_exception();
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

uvqa::VideoClip load_any_clip(const char* path) {
  return uvqa::load_y4m(path);
}

uvqa::TrainConfig train_config_from(const uvqa_train_opts* opts, double default_lr,
                                    int default_epochs) {
  uvqa::TrainConfig config;
  config.learning_rate = default_lr;
  config.epochs = default_epochs;
  if (opts) {
    if (opts->learning_rate > 0) config.learning_rate = opts->learning_rate;
    if (opts->epochs > 0) config.epochs = opts->epochs;
    if (opts->batch_size > 0) config.batch_size = opts->batch_size;
    if (opts->alpha >= 0) config.alpha = opts->alpha;
    config.seed = opts->seed;
  }
  return config;
}

}  // namespace

struct uvqa_clip {
  uvqa::VideoClip clip;
};

extern "C" {

const char* uvqa_version(void) { return "0.1.0"; }

const char* uvqa_status_name(int status) {
  switch (status) {
    case UVQA_OK: return "ok";
    case UVQA_ERR_INVALID_ARG: return "invalid argument";
    case UVQA_ERR_IO: return "i/o error";
    case UVQA_ERR_FORMAT: return "format error";
    case UVQA_ERR_DIMENSION: return "dimension mismatch";
    case UVQA_ERR_BUDGET_EXCEEDED: return "budget exceeded";
    case UVQA_ERR_STATE: return "invalid state";
    case UVQA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* uvqa_last_error(void) { return t_last_error.c_str(); }

void uvqa_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------------------ */

int uvqa_clip_open(const char* path, uvqa_clip** out) {
  if (!path || !out) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    auto* handle = new uvqa_clip{load_any_clip(path)};
    *out = handle;
  });
}

int uvqa_clip_open_raw(const char* path, int width, int height, double fps,
                       uvqa_clip** out) {
  if (!path || !out) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    auto* handle = new uvqa_clip{uvqa::load_raw_i420(path, width, height, fps)};
    *out = handle;
  });
}

int uvqa_clip_info(const uvqa_clip* clip, int* frames, int* width, int* height,
                   double* fps) {
  if (!clip) return set_error(UVQA_ERR_INVALID_ARG, "null clip");
  if (frames) *frames = clip->clip.frame_count();
  if (width) *width = clip->clip.width();
  if (height) *height = clip->clip.height();
  if (fps) *fps = clip->clip.fps();
  return UVQA_OK;
}

void uvqa_clip_close(uvqa_clip* clip) { delete clip; }

int uvqa_clip_features(const uvqa_clip* clip, int blur_samples,
                       uvqa_features_result* out) {
  if (!clip || !out) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    uvqa::FeatureResult r =
        uvqa::feature_triple(clip->clip, blur_samples > 0 ? blur_samples : 10);
    out->si = r.triple.si;
    out->ti = r.triple.ti;
    out->cpbd = r.triple.blur;
    out->cpbd_degenerate_frames = r.degenerate_frames;
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_clip_metric(const uvqa_clip* ref, const uvqa_clip* dist, const char* metric,
                     int threads, double* out_scalar) {
  if (!ref || !dist || !metric || !out_scalar)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    *out_scalar = uvqa::clip_metric_mean(ref->clip, dist->clip, metric,
                                         threads > 0 ? threads : 1);
  });
}

int uvqa_fr_maps(const char* ref_path, const char* dist_path, const char* metric,
                 const char* out_dir, int threads, char** json_summary) {
  if (!ref_path || !dist_path || !metric || !out_dir)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    namespace fs = std::filesystem;
    uvqa::VideoClip ref = load_any_clip(ref_path);
    uvqa::VideoClip dist = load_any_clip(dist_path);
    uvqa::require(ref.frame_count() == dist.frame_count(), uvqa::ErrorCode::dimension,
                  "clips have different frame counts");
    uvqa::StackKind kind = uvqa::stack_kind_from_name(metric);
    fs::create_directories(out_dir);

    const int n = ref.frame_count();
    std::vector<std::vector<uvqa::QualityMap>> stacks(n);
    uvqa::parallel_for(n, threads > 0 ? threads : 1, [&](std::size_t i) {
      stacks[i] = uvqa::map_stack_frame(kind, ref, dist, static_cast<int>(i));
    });

    uvqa::TensorArchive archive;
    json summary;
    summary["metric"] = metric;
    summary["frames"] = n;
    json frame_means = json::array();
    double total = 0.0;
    for (int f = 0; f < n; ++f) {
      json means = json::array();
      for (std::size_t m = 0; m < stacks[f].size(); ++m) {
        const uvqa::QualityMap& map = stacks[f][m];
        char name[64];
        std::snprintf(name, sizeof(name), "f%04d/%s", f, uvqa::metric_name(map.metric));
        archive.add(name,
                    {static_cast<std::uint64_t>(map.height),
                     static_cast<std::uint64_t>(map.width)},
                    map.values);
        means.push_back(map.mean());
      }
      total += means[0].get<double>();
      frame_means.push_back(means);
    }
    summary["frame_means"] = frame_means;
    summary["mean"] = total / n;
    uvqa::save_archive(archive,
                       (fs::path(out_dir) / "maps.uvqa").string());
    uvqa::write_text_file((fs::path(out_dir) / "summary.json").string(),
                          summary.dump(2));
    if (json_summary) *json_summary = dup_string(summary.dump());
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_sample_features(const double* features, int item_count, int dims,
                         int subset_size, int bins, int exact, uint64_t seed,
                         int restarts, int* selected_out, double* objective_out) {
  if (!features || !selected_out || !objective_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    std::vector<double> f(features, features + static_cast<std::size_t>(item_count) * dims);
    uvqa::SubsetProblem problem =
        uvqa::SubsetProblem::uniform_target(item_count, dims, bins, subset_size, f);
    uvqa::SelectionVector sel;
    if (exact > 0) {
      sel = uvqa::solve_exact(problem);
    } else if (exact == 0) {
      sel = uvqa::solve_local_search(problem, seed, restarts > 0 ? restarts : 4);
    } else {
      try {
        sel = uvqa::solve_exact(problem);
      } catch (const uvqa::Error& e) {
        if (e.code() != uvqa::ErrorCode::budget_exceeded) throw;
        sel = uvqa::solve_local_search(problem, seed, restarts > 0 ? restarts : 4);
      }
    }
    for (std::size_t i = 0; i < sel.selected.size(); ++i)
      selected_out[i] = sel.selected[i];
    *objective_out = sel.objective;
  });
}

int uvqa_sample_csv(const char* features_csv, int subset_size, int bins, int exact,
                    uint64_t seed, int restarts, char** json_out) {
  if (!features_csv || !json_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    auto bytes = uvqa::read_file(features_csv);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string line;
    uvqa::require(static_cast<bool>(std::getline(in, line)), uvqa::ErrorCode::format,
                  "empty CSV");
    uvqa::require(line.rfind("id,si,ti,cpbd", 0) == 0, uvqa::ErrorCode::format,
                  "expected header: id,si,ti,cpbd");
    std::vector<std::string> ids;
    std::vector<double> features;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      std::istringstream fs(line);
      std::string id, si, ti, cpbd;
      uvqa::require(static_cast<bool>(std::getline(fs, id, ',')) &&
                        static_cast<bool>(std::getline(fs, si, ',')) &&
                        static_cast<bool>(std::getline(fs, ti, ',')) &&
                        static_cast<bool>(std::getline(fs, cpbd, ',')),
                    uvqa::ErrorCode::format, "bad CSV row: " + line);
      ids.push_back(id);
      features.push_back(std::atof(si.c_str()));
      features.push_back(std::atof(ti.c_str()));
      features.push_back(std::atof(cpbd.c_str()));
    }
    const int item_count = static_cast<int>(ids.size());
    uvqa::SubsetProblem problem = uvqa::SubsetProblem::uniform_target(
        item_count, 3, bins, subset_size, features);

    uvqa::SelectionVector sel;
    std::string method;
    if (exact > 0) {
      sel = uvqa::solve_exact(problem);
      method = "exact";
    } else if (exact == 0) {
      sel = uvqa::solve_local_search(problem, seed, restarts > 0 ? restarts : 4);
      method = "local_search";
    } else {
      try {
        sel = uvqa::solve_exact(problem);
        method = "exact";
      } catch (const uvqa::Error& e) {
        if (e.code() != uvqa::ErrorCode::budget_exceeded) throw;
        sel = uvqa::solve_local_search(problem, seed, restarts > 0 ? restarts : 4);
        method = "local_search";
      }
    }
    json j;
    j["method"] = method;
    j["objective"] = sel.objective;
    j["indices"] = sel.selected;
    json selected_ids = json::array();
    for (int idx : sel.selected) selected_ids.push_back(ids[idx]);
    j["selected_ids"] = selected_ids;
    *json_out = dup_string(j.dump());
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_distort_dir(const char* in_dir, const char* out_dir, int count,
                     uint64_t seed, int threads, char** json_out) {
  if (!out_dir) return set_error(UVQA_ERR_INVALID_ARG, "null output dir");
  return guarded([&] {
    uvqa::CorpusOptions options;
    options.input_dir = in_dir ? in_dir : "";
    options.output_dir = out_dir;
    options.count = count;
    options.seed = seed;
    options.threads = threads > 0 ? threads : 1;
    int written = uvqa::build_distorted_corpus(options);
    if (json_out) {
      json j;
      j["count"] = written;
      j["out_dir"] = out_dir;
      *json_out = dup_string(j.dump());
    }
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_train_generator(const char* dataset_dir, const char* weights_out,
                         const uvqa_train_opts* opts, char** json_out) {
  if (!dataset_dir || !weights_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    uvqa::TrainConfig config = train_config_from(opts, 1e-3, 100);
    int depth = uvqa::kDeskGeneratorDepth, width = uvqa::kDeskGeneratorWidth;
    if (opts && opts->paper_config) {
      depth = uvqa::kPaperGeneratorDepth;
      width = uvqa::kPaperGeneratorWidth;
    }
    if (opts && opts->depth > 0) depth = opts->depth;
    if (opts && opts->width > 0) width = opts->width;

    uvqa::PatchDataset dataset = uvqa::load_patch_dataset(dataset_dir);
    uvqa::GeneratorNet net(depth, width, config.seed);
    uvqa::TrainCurve curve = uvqa::train_generator(net, dataset, config);
    uvqa::save_generator(net, weights_out);

    std::string curve_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < curve.epoch_loss.size(); ++e)
      curve_csv += std::to_string(e) + "," + std::to_string(curve.epoch_loss[e]) + "\n";
    uvqa::write_text_file(std::string(weights_out) + ".loss.csv", curve_csv);

    if (json_out) {
      json j;
      j["patches"] = dataset.size();
      j["epochs"] = config.epochs;
      j["depth"] = depth;
      j["width"] = width;
      j["initial_loss"] = curve.initial();
      j["final_loss"] = curve.final();
      j["weights"] = weights_out;
      *json_out = dup_string(j.dump());
    }
  });
}

int uvqa_train_pooling(const char* manifest_path, const char* generator_weights,
                       const char* weights_out, const uvqa_train_opts* opts,
                       const char* stack, int frame_count, int downsample,
                       int ablation, char** json_out) {
  if (!manifest_path || !generator_weights || !weights_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    uvqa::TrainConfig config = train_config_from(opts, 1e-4, 20);
    uvqa::StackOptions stack_options;
    stack_options.kind = stack ? uvqa::stack_kind_from_name(stack)
                               : uvqa::StackKind::vif;
    stack_options.downsample = downsample > 0 ? downsample : 1;
    if (ablation == 1) stack_options.ablation = uvqa::AblationMode::replace_source_maps;
    if (ablation == 2)
      stack_options.ablation = uvqa::AblationMode::replace_transcoded_maps;
    const int frames = frame_count > 0 ? frame_count : 30;

    uvqa::Manifest manifest = uvqa::Manifest::load(manifest_path);
    uvqa::GeneratorNet generator = uvqa::load_generator(generator_weights);

    uvqa::PoolingDataset dataset;
    for (const auto& video : manifest.videos) {
      uvqa::VideoClip src = uvqa::load_y4m(video.source);
      for (std::size_t v = 0; v < video.transcoded.size(); ++v) {
        uvqa::VideoClip dist = uvqa::load_y4m(video.transcoded[v]);
        const int samples = std::min(frames, src.frame_count());
        for (int idx : uvqa::sample_frames_uniform(src.frame_count(), samples)) {
          uvqa::FrameStacks stacks =
              uvqa::build_frame_stacks(src, dist, idx, generator, stack_options);
          uvqa::MapStackSample sample;
          sample.src = uvqa::Tensor(
              {stacks.src.dim(1), stacks.src.dim(2), stacks.src.dim(3)});
          sample.src.data = stacks.src.data;
          sample.trans = uvqa::Tensor(
              {stacks.trans.dim(1), stacks.trans.dim(2), stacks.trans.dim(3)});
          sample.trans.data = stacks.trans.data;
          sample.label = static_cast<float>(video.mos[v]);
          dataset.samples.push_back(std::move(sample));
        }
      }
    }

    const int width = (opts && opts->width > 0) ? opts->width : uvqa::kDeskPoolingWidth;
    uvqa::PoolingNet net(uvqa::stack_channels_src(stack_options),
                         uvqa::stack_channels_trans(stack_options), width, config.seed);
    uvqa::TrainCurve curve = uvqa::train_pooling(net, dataset, config);

    uvqa::PoolingMeta meta;
    meta.stack = stack_options.kind;
    meta.downsample = stack_options.downsample;
    meta.frame_count = frames;
    meta.ablation = ablation;
    uvqa::save_pooling(net, meta, weights_out);

    std::string curve_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < curve.epoch_loss.size(); ++e)
      curve_csv += std::to_string(e) + "," + std::to_string(curve.epoch_loss[e]) + "\n";
    uvqa::write_text_file(std::string(weights_out) + ".loss.csv", curve_csv);

    if (json_out) {
      json j;
      j["samples"] = dataset.samples.size();
      j["epochs"] = config.epochs;
      j["initial_loss"] = curve.initial();
      j["final_loss"] = curve.final();
      j["weights"] = weights_out;
      *json_out = dup_string(j.dump());
    }
  });
}

int uvqa_predict(const char* src_path, const char* dist_path,
                 const char* generator_weights, const char* pooling_weights,
                 int frame_count, double* out_score) {
  if (!src_path || !dist_path || !generator_weights || !pooling_weights || !out_score)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    uvqa::VideoClip src = load_any_clip(src_path);
    uvqa::VideoClip dist = load_any_clip(dist_path);
    uvqa::GeneratorNet generator = uvqa::load_generator(generator_weights);
    uvqa::PoolingMeta meta;
    uvqa::PoolingNet pooling = uvqa::load_pooling(pooling_weights, &meta);
    uvqa::StackOptions options;
    options.kind = meta.stack;
    options.downsample = meta.downsample;
    if (meta.ablation == 1) options.ablation = uvqa::AblationMode::replace_source_maps;
    if (meta.ablation == 2)
      options.ablation = uvqa::AblationMode::replace_transcoded_maps;
    const int frames = frame_count > 0 ? frame_count : meta.frame_count;
    *out_score = uvqa::predict_score(src, dist, generator, pooling, options, frames);
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_screen_csv(const char* scores_csv_path, char** json_out) {
  if (!scores_csv_path || !json_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    auto bytes = uvqa::read_file(scores_csv_path);
    std::string text(bytes.begin(), bytes.end());
    uvqa::ScoreMatrix matrix = uvqa::parse_scores_csv(text);
    uvqa::ScreeningResult screening = uvqa::screen_subjects(matrix);

    json j;
    json retained = json::array(), rejected = json::array();
    for (int s : screening.retained) retained.push_back(matrix.subjects[s]);
    for (int s : screening.rejected) rejected.push_back(matrix.subjects[s]);
    j["retained"] = retained;
    j["rejected"] = rejected;
    json diag = json::array();
    for (int s = 0; s < matrix.subject_count(); ++s) {
      const auto& d = screening.diagnostics[s];
      diag.push_back({{"subject", matrix.subjects[s]},
                      {"above", d.above},
                      {"below", d.below},
                      {"outlier_ratio", d.outlier_ratio},
                      {"direction_ratio", d.direction_ratio},
                      {"rejected", d.rejected}});
    }
    j["diagnostics"] = diag;

    std::vector<double> mos_values = uvqa::mos(matrix);
    json mos_table = json::array();
    for (int p = 0; p < matrix.presentation_count(); ++p)
      mos_table.push_back({{"presentation", matrix.presentations[p].id},
                           {"mos", mos_values[p]}});
    j["mos"] = mos_table;

    bool has_refs = false;
    for (const auto& p : matrix.presentations) has_refs |= p.is_hidden_reference;
    if (has_refs) {
      std::vector<double> dmos_values = uvqa::dmos(matrix);
      json dmos_table = json::array();
      for (int p = 0; p < matrix.presentation_count(); ++p)
        dmos_table.push_back({{"presentation", matrix.presentations[p].id},
                              {"dmos", dmos_values[p]}});
      j["dmos"] = dmos_table;
    }
    *json_out = dup_string(j.dump());
  });
}

int uvqa_fit_logistic(const double* x, const double* y, int n, double beta_out[5],
                      double* residual_rmse, int* converged) {
  if (!x || !y || !beta_out) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    std::vector<double> vx(x, x + n), vy(y, y + n);
    uvqa::LogisticParams params = uvqa::fit_logistic(vx, vy);
    for (int i = 0; i < 5; ++i) beta_out[i] = params.beta[i];
    if (residual_rmse) *residual_rmse = params.residual_rmse;
    if (converged) *converged = params.converged ? 1 : 0;
  });
}

int uvqa_logistic_eval(const double beta[5], double x, double* out) {
  if (!beta || !out) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  uvqa::LogisticParams params;
  for (int i = 0; i < 5; ++i) params.beta[i] = beta[i];
  *out = uvqa::logistic_eval(params, x);
  return UVQA_OK;
}

int uvqa_srocc(const double* x, const double* y, int n, double* rho) {
  if (!x || !y || !rho) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    std::vector<double> vx(x, x + n), vy(y, y + n);
    uvqa::CorrelationResult r = uvqa::srocc(vx, vy);
    uvqa::require(r.defined, uvqa::ErrorCode::invalid_arg,
                  "srocc undefined for constant input");
    *rho = r.value;
  });
}

int uvqa_plcc_rmse(const double* x, const double* y, int n, const double beta[5],
                   double* plcc, double* rmse) {
  if (!x || !y) return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    std::vector<double> vx(x, x + n), vy(y, y + n);
    uvqa::LogisticParams params;
    if (beta)
      for (int i = 0; i < 5; ++i) params.beta[i] = beta[i];
    uvqa::PlccRmse result = uvqa::plcc_rmse(vx, vy, beta ? &params : nullptr);
    uvqa::require(result.plcc.defined, uvqa::ErrorCode::invalid_arg,
                  "plcc undefined for constant input");
    if (plcc) *plcc = result.plcc.value;
    if (rmse) *rmse = result.rmse;
  });
}

int uvqa_fit_csv(const char* xy_csv_path, char** json_out) {
  if (!xy_csv_path || !json_out)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    auto bytes = uvqa::read_file(xy_csv_path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string line;
    uvqa::require(static_cast<bool>(std::getline(in, line)), uvqa::ErrorCode::format,
                  "empty CSV");
    uvqa::require(line.rfind("objective,mos", 0) == 0, uvqa::ErrorCode::format,
                  "expected header: objective,mos");
    std::vector<double> x, y;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      std::istringstream fs(line);
      std::string a, b;
      uvqa::require(static_cast<bool>(std::getline(fs, a, ',')) &&
                        static_cast<bool>(std::getline(fs, b, ',')),
                    uvqa::ErrorCode::format, "bad CSV row: " + line);
      x.push_back(std::atof(a.c_str()));
      y.push_back(std::atof(b.c_str()));
    }
    uvqa::LogisticParams params = uvqa::fit_logistic(x, y);
    uvqa::PlccRmse fitted = uvqa::plcc_rmse(x, y, &params);
    uvqa::PlccRmse raw = uvqa::plcc_rmse(x, y, nullptr);
    uvqa::CorrelationResult rank = uvqa::srocc(x, y);

    json j;
    j["beta"] = {params.beta[0], params.beta[1], params.beta[2], params.beta[3],
                 params.beta[4]};
    j["residual_rmse"] = params.residual_rmse;
    j["converged"] = params.converged;
    j["iterations"] = params.iterations;
    j["plcc"] = fitted.plcc.value;
    j["rmse"] = fitted.rmse;
    j["plcc_raw"] = raw.plcc.value;
    j["srocc"] = rank.defined ? rank.value : 0.0;
    *json_out = dup_string(j.dump());
  });
}

/* ------------------------------------------------------------------------ */

int uvqa_run_experiment(const char* manifest_path, const char* generator_weights,
                        const char* config, uint64_t seed, const char* out_dir,
                        char** json_report) {
  if (!manifest_path || !generator_weights)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    namespace fs = std::filesystem;
    uvqa::ExperimentConfig cfg;
    cfg.manifest_path = manifest_path;
    cfg.generator_weights = generator_weights;
    cfg.seed = seed;
    if (config) {
      std::istringstream in(config);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        uvqa::require(eq != std::string::npos, uvqa::ErrorCode::invalid_arg,
                      "config line without '=': " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!value.empty() && (value.back() == '\r' || value.back() == ' '))
          value.pop_back();
        cfg.apply(key, value);
      }
    }
    uvqa::RunReport report = uvqa::run_experiment(cfg);
    std::string report_json = report.to_json();
    if (out_dir) {
      fs::create_directories(out_dir);
      uvqa::write_text_file((fs::path(out_dir) / "report.json").string(), report_json);
      uvqa::write_text_file((fs::path(out_dir) / "report.csv").string(),
                            report.to_csv());
      uvqa::write_text_file((fs::path(out_dir) / "plotdata.json").string(),
                            uvqa::reports_plotdata({report}));
    }
    if (json_report) *json_report = dup_string(report_json);
  });
}

int uvqa_report_convert(const char* const* report_paths, int count,
                        const char* format, const char* out_path) {
  if (!report_paths || count < 1 || !format || !out_path)
    return set_error(UVQA_ERR_INVALID_ARG, "null argument");
  return guarded([&] {
    std::vector<uvqa::RunReport> reports;
    for (int i = 0; i < count; ++i) {
      auto bytes = uvqa::read_file(report_paths[i]);
      reports.push_back(
          uvqa::RunReport::from_json(std::string(bytes.begin(), bytes.end())));
    }
    std::string fmt(format);
    if (fmt == "csv") {
      std::string out;
      for (const auto& r : reports) out += r.to_csv();
      uvqa::write_text_file(out_path, out);
    } else if (fmt == "plotdata") {
      uvqa::write_text_file(out_path, uvqa::reports_plotdata(reports));
    } else if (fmt == "json") {
      uvqa::require(reports.size() == 1, uvqa::ErrorCode::invalid_arg,
                    "json format expects a single report");
      uvqa::write_text_file(out_path, reports[0].to_json());
    } else {
      uvqa::fail(uvqa::ErrorCode::invalid_arg, "unknown format '" + fmt + "'");
    }
  });
}

int uvqa_make_demo_corpus(const char* out_dir, int sources, int versions, int frames,
                          int size, uint64_t seed, char** manifest_path_out) {
  if (!out_dir) return set_error(UVQA_ERR_INVALID_ARG, "null output dir");
  return guarded([&] {
    uvqa::DemoCorpusOptions options;
    options.out_dir = out_dir;
    if (sources > 0) options.sources = sources;
    if (versions > 0) options.versions = versions;
    if (frames > 0) options.frames = frames;
    if (size > 0) options.size = size;
    options.seed = seed;
    std::string manifest = uvqa::make_demo_corpus(options);
    if (manifest_path_out) *manifest_path_out = dup_string(manifest);
  });
}

} /* extern "C" */
