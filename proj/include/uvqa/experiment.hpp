// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvqa/models.hpp"
#include "uvqa/stats.hpp"

namespace uvqa {

// Corpus manifest: every source clip with its transcoded versions and their
// subjective (or proxy) scores.
struct ManifestVideo {
  std::string source;
  std::vector<std::string> transcoded;
  std::vector<double> mos;
};

struct Manifest {
  std::vector<ManifestVideo> videos;

  static Manifest parse(const std::string& json_text, const std::string& base_dir = "");
  static Manifest load(const std::string& path);
};

struct ExperimentConfig {
  std::string manifest_path;
  std::string generator_weights;
  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double test_ratio = 0.2;
  int repeats = 20;
  StackKind stack = StackKind::vif;
  AblationMode ablation = AblationMode::none;
  int frame_count = 30;
  int downsample = 1;
  int epochs = 20;
  double learning_rate = 1e-4;
  int batch_size = 8;
  int pooling_width = kDeskPoolingWidth;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string method_name = "uvqa";

  // key=value override (the --config file format and CLI flags funnel here).
  void apply(const std::string& key, const std::string& value);
  void validate() const;
};

struct SourceSplits {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// Source-level split: seeded shuffle, then floor(ratio*K) for val and test
// with the remainder going to train. All versions of a source stay together.
SourceSplits make_splits(int source_count, double train_ratio, double val_ratio,
                         double test_ratio, std::uint64_t seed);

struct RepeatResult {
  int repeat = 0;
  double srocc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;
  int best_epoch = -1;
  double best_val_srocc = 0.0;
};

struct RunReport {
  std::string method;
  std::vector<RepeatResult> repeats;
  double srocc_mean = 0, srocc_std = 0;
  double plcc_mean = 0, plcc_std = 0;
  double rmse_mean = 0, rmse_std = 0;

  void aggregate();
  std::string to_json() const;
  static RunReport from_json(const std::string& text);
  std::string to_csv() const;
};

// Box-plot quantiles (25/50/75 plus the mean) per method and statistic.
std::string reports_plotdata(const std::vector<RunReport>& reports);

// The split/train/select/test protocol: per repeat, split at source level,
// train the pooling net, keep the epoch with the highest validation SROCC,
// report test SROCC raw and PLCC/RMSE after the logistic fit on train+val.
RunReport run_experiment(const ExperimentConfig& config);

// Self-contained synthetic corpus: procedural translating-texture sources at
// several intrinsic quality levels, block-DCT transcodes, proxy MOS from the
// oracle VIF against the hidden pristine clip. Returns the manifest path.
struct DemoCorpusOptions {
  std::string out_dir;
  int sources = 12;
  int versions = 4;
  int frames = 10;
  int size = 64;
  double label_noise = 0.1;
  std::uint64_t seed = 0;
};
std::string make_demo_corpus(const DemoCorpusOptions& options);

}  // namespace uvqa
