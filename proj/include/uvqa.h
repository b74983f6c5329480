/*
 * SPDX-FileCopyrightText: 2026 uvqa contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API of the uvqa corrupted-reference video quality toolkit.
 *
 * Conventions:
 *  - every function returns a uvqa_status (0 = UVQA_OK); on failure a
 *    thread-local message is available through uvqa_last_error();
 *  - opaque handles are created/destroyed in matching pairs;
 *  - functions with a char** out parameter return a heap JSON string that
 *    the caller releases with uvqa_string_free().
 */

#ifndef UVQA_H
#define UVQA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uvqa_status {
  UVQA_OK = 0,
  UVQA_ERR_INVALID_ARG = 1,
  UVQA_ERR_IO = 2,
  UVQA_ERR_FORMAT = 3,
  UVQA_ERR_DIMENSION = 4,
  UVQA_ERR_BUDGET_EXCEEDED = 5,
  UVQA_ERR_STATE = 6,
  UVQA_ERR_INTERNAL = 7
} uvqa_status;

const char* uvqa_version(void);
const char* uvqa_status_name(int status);
/* Message of the most recent failure on this thread. */
const char* uvqa_last_error(void);
void uvqa_string_free(char* s);

/* ------------------------------------------------------------------------ */
/* Clips                                                                     */

typedef struct uvqa_clip uvqa_clip;

/* Y4M (8-bit 4:2:0). */
int uvqa_clip_open(const char* path, uvqa_clip** out);
/* Raw I420 with sidecar geometry. */
int uvqa_clip_open_raw(const char* path, int width, int height, double fps,
                       uvqa_clip** out);
int uvqa_clip_info(const uvqa_clip* clip, int* frames, int* width, int* height,
                   double* fps);
void uvqa_clip_close(uvqa_clip* clip);

/* ------------------------------------------------------------------------ */
/* Content features (SI / TI / CPBD)                                         */

typedef struct uvqa_features_result {
  double si;
  double ti;
  double cpbd;
  int cpbd_degenerate_frames; /* sampled frames with no measurable edges */
} uvqa_features_result;

int uvqa_clip_features(const uvqa_clip* clip, int blur_samples,
                       uvqa_features_result* out);

/* ------------------------------------------------------------------------ */
/* Full-reference metrics                                                    */

/* metric: psnr | ssim | msssim | vif | mdsi (frame-mean scalar). */
int uvqa_clip_metric(const uvqa_clip* ref, const uvqa_clip* dist,
                     const char* metric, int threads, double* out_scalar);

/* Writes per-frame quality maps (one UVQA archive) plus summary.json into
 * out_dir; metric: ssim | vif | mdsi | vmaf_style. */
int uvqa_fr_maps(const char* ref_path, const char* dist_path, const char* metric,
                 const char* out_dir, int threads, char** json_summary);

/* ------------------------------------------------------------------------ */
/* Subset sampling (feature-uniform selection)                               */

/* CSV columns: id,si,ti,cpbd. exact < 0 picks exhaustive search when the
 * enumeration fits the budget, local search otherwise. */
int uvqa_sample_csv(const char* features_csv, int subset_size, int bins, int exact,
                    uint64_t seed, int restarts, char** json_out);

/* In-memory instance: features is item-major (item_count x dims). */
int uvqa_sample_features(const double* features, int item_count, int dims,
                         int subset_size, int bins, int exact, uint64_t seed,
                         int restarts, int* selected_out, double* objective_out);

/* ------------------------------------------------------------------------ */
/* Distortion synthesis                                                      */

/* in_dir empty/NULL: procedural textures. Writes src_/dist_ PGM pairs,
 * label_*.uvqa VIF maps and provenance.json. */
int uvqa_distort_dir(const char* in_dir, const char* out_dir, int count,
                     uint64_t seed, int threads, char** json_out);

/* ------------------------------------------------------------------------ */
/* Models                                                                    */

typedef struct uvqa_train_opts {
  double learning_rate; /* <= 0: module default */
  int epochs;           /* <= 0: module default */
  int batch_size;       /* <= 0: 8 */
  double alpha;         /* generator loss mix; < 0: 0.84 */
  uint64_t seed;
  int depth;  /* generator residual blocks; <= 0: desk default 4 */
  int width;  /* feature maps; <= 0: desk default 16 */
  int paper_config; /* nonzero: depth 10, width 64 */
} uvqa_train_opts;

int uvqa_train_generator(const char* dataset_dir, const char* weights_out,
                         const uvqa_train_opts* opts, char** json_out);

/* stack: ssim | vif | mdsi | vmaf_style. ablation: 0 none, 1 replace source
 * maps with frames, 2 replace transcoded maps with frames. */
int uvqa_train_pooling(const char* manifest_path, const char* generator_weights,
                       const char* weights_out, const uvqa_train_opts* opts,
                       const char* stack, int frame_count, int downsample,
                       int ablation, char** json_out);

int uvqa_predict(const char* src_path, const char* dist_path,
                 const char* generator_weights, const char* pooling_weights,
                 int frame_count, double* out_score);

/* ------------------------------------------------------------------------ */
/* Subjective statistics                                                     */

/* CSV columns: subject_id,presentation_id,score[,source_id,is_ref]. */
int uvqa_screen_csv(const char* scores_csv_path, char** json_out);

int uvqa_fit_logistic(const double* x, const double* y, int n, double beta_out[5],
                      double* residual_rmse, int* converged);
int uvqa_logistic_eval(const double beta[5], double x, double* out);
int uvqa_srocc(const double* x, const double* y, int n, double* rho);
/* beta == NULL evaluates raw PLCC. */
int uvqa_plcc_rmse(const double* x, const double* y, int n, const double beta[5],
                   double* plcc, double* rmse);
/* CSV columns: objective,mos. Fits Eq.-8-style logistic, reports correlations. */
int uvqa_fit_csv(const char* xy_csv_path, char** json_out);

/* ------------------------------------------------------------------------ */
/* Experiment protocol                                                       */

/* config: newline-separated key=value pairs (may be NULL); keys: repeats,
 * train_ratio, val_ratio, test_ratio, stack, ablation, frame_count,
 * downsample, epochs, learning_rate, batch_size, pooling_width, seed,
 * threads, method. Writes report.json/report.csv/plotdata.json to out_dir
 * when non-NULL. */
int uvqa_run_experiment(const char* manifest_path, const char* generator_weights,
                        const char* config, uint64_t seed, const char* out_dir,
                        char** json_report);

/* format: csv | plotdata. Reads one or more report JSON files. */
int uvqa_report_convert(const char* const* report_paths, int count,
                        const char* format, const char* out_path);

/* Synthetic manifest corpus for end-to-end runs; returns the manifest path. */
int uvqa_make_demo_corpus(const char* out_dir, int sources, int versions, int frames,
                          int size, uint64_t seed, char** manifest_path_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UVQA_H */
