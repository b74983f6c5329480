// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "uvqa/distort.hpp"
#include "uvqa/rng.hpp"

namespace uvqa {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Manifest

Manifest Manifest::parse(const std::string& json_text, const std::string& base_dir) {
  Manifest manifest;
  try {
    json j = json::parse(json_text);
    const json& list = j.is_array() ? j : j.at("videos");
    for (const auto& entry : list) {
      ManifestVideo v;
      v.source = entry.at("source").get<std::string>();
      for (const auto& t : entry.at("transcoded"))
        v.transcoded.push_back(t.get<std::string>());
      for (const auto& m : entry.at("mos")) v.mos.push_back(m.get<double>());
      require(v.transcoded.size() == v.mos.size(), ErrorCode::format,
              "manifest: transcoded/mos count mismatch for '" + v.source + "'");
      require(!v.transcoded.empty(), ErrorCode::format,
              "manifest: '" + v.source + "' has no transcoded versions");
      if (!base_dir.empty()) {
        auto rebase = [&](std::string& path) {
          if (!fs::path(path).is_absolute()) path = (fs::path(base_dir) / path).string();
        };
        rebase(v.source);
        for (auto& t : v.transcoded) rebase(t);
      }
      manifest.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("manifest JSON: ") + e.what());
  }
  require(!manifest.videos.empty(), ErrorCode::format, "manifest lists no videos");
  return manifest;
}

Manifest Manifest::load(const std::string& path) {
  auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  return parse(text, fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
  if (key == "repeats") repeats = std::stoi(value);
  else if (key == "train_ratio") train_ratio = std::stod(value);
  else if (key == "val_ratio") val_ratio = std::stod(value);
  else if (key == "test_ratio") test_ratio = std::stod(value);
  else if (key == "stack") stack = stack_kind_from_name(value);
  else if (key == "ablation") {
    if (value == "none") ablation = AblationMode::none;
    else if (value == "no_source_maps") ablation = AblationMode::replace_source_maps;
    else if (value == "no_transcoded_maps") ablation = AblationMode::replace_transcoded_maps;
    else fail(ErrorCode::invalid_arg, "unknown ablation '" + value + "'");
  }
  else if (key == "frame_count") frame_count = std::stoi(value);
  else if (key == "downsample") downsample = std::stoi(value);
  else if (key == "epochs") epochs = std::stoi(value);
  else if (key == "learning_rate" || key == "lr") learning_rate = std::stod(value);
  else if (key == "batch_size") batch_size = std::stoi(value);
  else if (key == "pooling_width") pooling_width = std::stoi(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "threads") threads = std::stoi(value);
  else if (key == "method") method_name = value;
  else fail(ErrorCode::invalid_arg, "unknown config key '" + key + "'");
}

void ExperimentConfig::validate() const {
  require(std::abs(train_ratio + val_ratio + test_ratio - 1.0) <= 1e-9,
          ErrorCode::invalid_arg, "split ratios must sum to 1");
  require(repeats >= 1, ErrorCode::invalid_arg, "repeats must be >= 1");
  require(frame_count >= 1 && downsample >= 1 && epochs >= 1 && batch_size >= 1,
          ErrorCode::invalid_arg, "invalid training parameters");
}

// ---------------------------------------------------------------------------
// Splits

SourceSplits make_splits(int source_count, double train_ratio, double val_ratio,
                         double test_ratio, std::uint64_t seed) {
  require(source_count >= 5, ErrorCode::invalid_arg,
          "need at least 5 sources to split");
  require(std::abs(train_ratio + val_ratio + test_ratio - 1.0) <= 1e-9,
          ErrorCode::invalid_arg, "split ratios must sum to 1");
  const int n_val = static_cast<int>(std::floor(val_ratio * source_count));
  const int n_test = static_cast<int>(std::floor(test_ratio * source_count));
  const int n_train = source_count - n_val - n_test;  // remainders land here
  require(n_train >= 1 && n_val >= 1 && n_test >= 1, ErrorCode::invalid_arg,
          "split ratios leave an empty partition");

  std::vector<int> order(source_count);
  for (int i = 0; i < source_count; ++i) order[i] = i;
  CounterRng rng(CounterRng::derive(seed, 0x5B117ull));
  for (int i = source_count; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(static_cast<std::uint64_t>(i))]);

  SourceSplits splits;
  splits.train.assign(order.begin(), order.begin() + n_train);
  splits.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  splits.test.assign(order.begin() + n_train + n_val, order.end());
  return splits;
}

// ---------------------------------------------------------------------------
// Report

void RunReport::aggregate() {
  std::vector<double> s, p, r;
  for (const auto& row : repeats) {
    s.push_back(row.srocc);
    p.push_back(row.plcc);
    r.push_back(row.rmse);
  }
  srocc_mean = mean_of(s);
  srocc_std = stddev_of(s);
  plcc_mean = mean_of(p);
  plcc_std = stddev_of(p);
  rmse_mean = mean_of(r);
  rmse_std = stddev_of(r);
}

std::string RunReport::to_json() const {
  json j;
  j["method"] = method;
  j["repeats"] = json::array();
  for (const auto& row : repeats) {
    j["repeats"].push_back({{"repeat", row.repeat},
                            {"srocc", row.srocc},
                            {"plcc", row.plcc},
                            {"rmse", row.rmse},
                            {"best_epoch", row.best_epoch},
                            {"best_val_srocc", row.best_val_srocc}});
  }
  j["aggregate"] = {{"srocc_mean", srocc_mean}, {"srocc_std", srocc_std},
                    {"plcc_mean", plcc_mean},   {"plcc_std", plcc_std},
                    {"rmse_mean", rmse_mean},   {"rmse_std", rmse_std}};
  return j.dump(2);
}

RunReport RunReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("report JSON: ") + e.what());
  }
  RunReport report;
  report.method = j.at("method").get<std::string>();
  for (const auto& row : j.at("repeats")) {
    RepeatResult r;
    r.repeat = row.at("repeat").get<int>();
    r.srocc = row.at("srocc").get<double>();
    r.plcc = row.at("plcc").get<double>();
    r.rmse = row.at("rmse").get<double>();
    r.best_epoch = row.value("best_epoch", -1);
    r.best_val_srocc = row.value("best_val_srocc", 0.0);
    report.repeats.push_back(r);
  }
  report.aggregate();
  return report;
}

std::string RunReport::to_csv() const {
  std::string out = "repeat,srocc,plcc,rmse,best_epoch,best_val_srocc\n";
  char line[160];
  for (const auto& row : repeats) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%d,%.6f\n", row.repeat,
                  row.srocc, row.plcc, row.rmse, row.best_epoch, row.best_val_srocc);
    out += line;
  }
  return out;
}

std::string reports_plotdata(const std::vector<RunReport>& reports) {
  json j = json::array();
  for (const auto& report : reports) {
    auto stats_of = [&](auto getter) {
      std::vector<double> values;
      for (const auto& row : report.repeats) values.push_back(getter(row));
      return json{{"p25", percentile(values, 0.25)},
                  {"p50", percentile(values, 0.50)},
                  {"p75", percentile(values, 0.75)},
                  {"mean", mean_of(values)}};
    };
    j.push_back({{"method", report.method},
                 {"srocc", stats_of([](const RepeatResult& r) { return r.srocc; })},
                 {"plcc", stats_of([](const RepeatResult& r) { return r.plcc; })},
                 {"rmse", stats_of([](const RepeatResult& r) { return r.rmse; })}});
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

struct VideoEntry {
  int source_index = 0;
  double mos = 0.0;
  std::vector<int> sample_indices;  // into the flat sample store
};

struct PrecomputedCorpus {
  std::vector<MapStackSample> samples;
  std::vector<VideoEntry> videos;
  int source_count = 0;
};

VideoClip load_clip(const std::string& path) {
  require(fs::exists(path), ErrorCode::io, "missing file '" + path + "'");
  return load_y4m(path);
}

std::vector<std::vector<float>> snapshot_tensors(const std::vector<ParamRef<float>>& refs) {
  std::vector<std::vector<float>> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(r.tensor->data);
  return out;
}

void restore_tensors(const std::vector<ParamRef<float>>& refs,
                     const std::vector<std::vector<float>>& snapshot) {
  for (std::size_t i = 0; i < refs.size(); ++i) refs[i].tensor->data = snapshot[i];
}

GeneratorNet clone_generator(GeneratorNet& net) {
  GeneratorNet copy(net.depth(), net.width(), 0);
  restore_tensors(copy.params(), snapshot_tensors(net.params()));
  restore_tensors(copy.buffers(), snapshot_tensors(net.buffers()));
  return copy;
}

// Maps every (video, frame sample) to a stack once; repeats only re-split and
// retrain on top of this store.
PrecomputedCorpus precompute_stacks(const Manifest& manifest, GeneratorNet& generator,
                                    const ExperimentConfig& config) {
  PrecomputedCorpus corpus;
  corpus.source_count = static_cast<int>(manifest.videos.size());

  StackOptions options;
  options.kind = config.stack;
  options.downsample = config.downsample;
  options.ablation = config.ablation;

  struct Job {
    int source_index, version_index;
    double mos;
  };
  std::vector<Job> jobs;
  for (int s = 0; s < corpus.source_count; ++s)
    for (std::size_t v = 0; v < manifest.videos[s].transcoded.size(); ++v)
      jobs.push_back({s, static_cast<int>(v), manifest.videos[s].mos[v]});

  std::vector<std::vector<MapStackSample>> per_job(jobs.size());
  const int n_threads = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs.size())));

  auto worker = [&](int tid, GeneratorNet& gen) {
    for (std::size_t j = tid; j < jobs.size(); j += n_threads) {
      const Job& job = jobs[j];
      VideoClip src = load_clip(manifest.videos[job.source_index].source);
      VideoClip dist = load_clip(manifest.videos[job.source_index].transcoded[job.version_index]);
      require(src.frame_count() == dist.frame_count(), ErrorCode::dimension,
              "frame count mismatch for '" + dist.id + "'");
      const int samples = std::min(config.frame_count, src.frame_count());
      for (int idx : sample_frames_uniform(src.frame_count(), samples)) {
        FrameStacks stacks = build_frame_stacks(src, dist, idx, gen, options);
        MapStackSample sample;
        // (1,C,H,W) -> (C,H,W)
        sample.src = Tensor({stacks.src.dim(1), stacks.src.dim(2), stacks.src.dim(3)});
        sample.src.data = stacks.src.data;
        sample.trans = Tensor({stacks.trans.dim(1), stacks.trans.dim(2), stacks.trans.dim(3)});
        sample.trans.data = stacks.trans.data;
        sample.label = static_cast<float>(job.mos);
        per_job[j].push_back(std::move(sample));
      }
    }
  };

  if (n_threads <= 1) {
    worker(0, generator);
  } else {
    std::vector<GeneratorNet> gens;
    gens.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) gens.push_back(clone_generator(generator));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t]() { worker(t, gens[t]); });
    for (auto& th : pool) th.join();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    VideoEntry entry;
    entry.source_index = jobs[j].source_index;
    entry.mos = jobs[j].mos;
    for (auto& sample : per_job[j]) {
      entry.sample_indices.push_back(static_cast<int>(corpus.samples.size()));
      corpus.samples.push_back(std::move(sample));
    }
    corpus.videos.push_back(std::move(entry));
  }
  return corpus;
}

// Mean pooled score of one video's precomputed frame stacks (eval mode).
double predict_video(PoolingNet& net, const PrecomputedCorpus& corpus,
                     const VideoEntry& video) {
  double sum = 0.0;
  for (int idx : video.sample_indices) {
    const MapStackSample& s = corpus.samples[idx];
    Tensor src({1, s.src.dim(0), s.src.dim(1), s.src.dim(2)});
    src.data = s.src.data;
    Tensor trans({1, s.trans.dim(0), s.trans.dim(1), s.trans.dim(2)});
    trans.data = s.trans.data;
    Tensor score = net.forward(src, trans, false);
    sum += score.data[0];
  }
  return sum / static_cast<double>(video.sample_indices.size());
}

struct VideoPredictions {
  std::vector<double> predicted;
  std::vector<double> mos;
};

VideoPredictions predict_set(PoolingNet& net, const PrecomputedCorpus& corpus,
                             const std::vector<int>& source_set) {
  VideoPredictions out;
  for (const VideoEntry& video : corpus.videos) {
    if (std::find(source_set.begin(), source_set.end(), video.source_index) ==
        source_set.end())
      continue;
    out.predicted.push_back(predict_video(net, corpus, video));
    out.mos.push_back(video.mos);
  }
  return out;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  Manifest manifest = Manifest::load(config.manifest_path);
  require(!config.generator_weights.empty(), ErrorCode::invalid_arg,
          "pre-trained generator weights are required");
  GeneratorNet generator = load_generator(config.generator_weights);

  PrecomputedCorpus corpus = precompute_stacks(manifest, generator, config);
  const int in_src = stack_channels_src({config.stack, config.downsample, config.ablation});
  const int in_trans =
      stack_channels_trans({config.stack, config.downsample, config.ablation});

  RunReport report;
  report.method = config.method_name;

  for (int repeat = 0; repeat < config.repeats; ++repeat) {
    const std::uint64_t repeat_seed = CounterRng::derive(config.seed, 1000 + repeat);
    SourceSplits splits = make_splits(corpus.source_count, config.train_ratio,
                                      config.val_ratio, config.test_ratio, repeat_seed);

    PoolingDataset train_set;
    for (const VideoEntry& video : corpus.videos) {
      if (std::find(splits.train.begin(), splits.train.end(), video.source_index) ==
          splits.train.end())
        continue;
      for (int idx : video.sample_indices) train_set.samples.push_back(corpus.samples[idx]);
    }
    require(!train_set.samples.empty(), ErrorCode::invalid_arg, "empty training split");

    PoolingNet net(in_src, in_trans, config.pooling_width,
                   CounterRng::derive(repeat_seed, 0x1717ull));

    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.seed = repeat_seed;

    // Model selection: the epoch with the highest validation SROCC.
    RepeatResult row;
    row.repeat = repeat;
    auto params = net.params();
    auto buffers = net.buffers();
    std::vector<std::vector<float>> best_params, best_buffers;
    double best_val = -2.0;
    int best_epoch = -1;

    auto after_epoch = [&](int epoch, double) {
      VideoPredictions val = predict_set(net, corpus, splits.val);
      CorrelationResult r = srocc(val.predicted, val.mos);
      const double value = r.defined ? r.value : -1.0;
      if (value > best_val) {
        best_val = value;
        best_epoch = epoch;
        best_params = snapshot_tensors(params);
        best_buffers = snapshot_tensors(buffers);
      }
    };
    train_pooling_with_callback(net, train_set, tc, after_epoch);
    restore_tensors(params, best_params);
    restore_tensors(buffers, best_buffers);
    row.best_epoch = best_epoch;
    row.best_val_srocc = best_val;

    // Test SROCC on raw predictions; PLCC/RMSE after the train+val logistic fit.
    VideoPredictions test = predict_set(net, corpus, splits.test);
    CorrelationResult test_srocc = srocc(test.predicted, test.mos);
    row.srocc = test_srocc.defined ? test_srocc.value : 0.0;

    std::vector<int> fit_sources = splits.train;
    fit_sources.insert(fit_sources.end(), splits.val.begin(), splits.val.end());
    VideoPredictions fit_set = predict_set(net, corpus, fit_sources);
    LogisticParams fitted;
    bool have_fit = false;
    try {
      fitted = fit_logistic(fit_set.predicted, fit_set.mos);
      have_fit = true;
    } catch (const Error&) {
      // degenerate predictions: fall back to raw PLCC
    }
    PlccRmse pr = plcc_rmse(test.predicted, test.mos, have_fit ? &fitted : nullptr);
    row.plcc = pr.plcc.defined ? pr.plcc.value : 0.0;
    row.rmse = pr.rmse;

    report.repeats.push_back(row);
  }
  report.aggregate();
  return report;
}

// ---------------------------------------------------------------------------
// Demo corpus

namespace {

// Translating multi-octave texture: per-frame windows into one large field so
// frame-to-frame motion is a pure shift.
VideoClip make_texture_clip(int size, int frames, std::uint64_t seed) {
  const int shift_x = 3, shift_y = 2;
  Plane field = make_texture(size + shift_x * frames, size + shift_y * frames, seed, 5);
  VideoClip clip;
  clip.fps_num = 30;
  clip.fps_den = 1;
  for (int f = 0; f < frames; ++f) {
    Plane frame(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        frame.at(x, y) = field.at(x + f * shift_x, y + f * shift_y);
    clip.luma.push_back(std::move(frame));
    clip.chroma_u.emplace_back(size / 2, size / 2, 0.5f);
    clip.chroma_v.emplace_back(size / 2, size / 2, 0.5f);
  }
  return clip;
}

VideoClip transform_luma(const VideoClip& clip, const std::function<Plane(const Plane&, int)>& fn) {
  VideoClip out = clip;
  for (int f = 0; f < clip.frame_count(); ++f) out.luma[f] = fn(clip.luma[f], f);
  return out;
}

}  // namespace

std::string make_demo_corpus(const DemoCorpusOptions& options) {
  require(!options.out_dir.empty(), ErrorCode::invalid_arg, "output dir required");
  require(options.sources >= 5, ErrorCode::invalid_arg,
          "demo corpus needs at least 5 sources");
  require(options.size % 2 == 0 && options.size >= 32, ErrorCode::invalid_arg,
          "clip size must be even and at least 32");
  fs::create_directories(options.out_dir);

  CounterRng label_rng(CounterRng::derive(options.seed, 0x3A6E15ull));
  json manifest = json::array();

  for (int s = 0; s < options.sources; ++s) {
    const std::uint64_t source_seed = CounterRng::derive(options.seed, 100 + s);
    VideoClip pristine = make_texture_clip(options.size, options.frames, source_seed);

    // Intrinsic source degradation varies across sources: this is what makes
    // the reference "corrupted" and the source branch informative.
    const int level = s % 4;
    VideoClip source = transform_luma(pristine, [&](const Plane& p, int f) {
      if (level == 0) return p;
      if (level % 2 == 1) {
        double sigma = 3.0 * ((level + 1) / 2);
        return gaussian_noise(p, sigma, CounterRng::derive(source_seed, 7000 + f));
      }
      return gaussian_blur(p, 0.8 * (level / 2 + 1));
    });

    char name[64];
    std::snprintf(name, sizeof(name), "src_%03d.y4m", s);
    const std::string source_path = (fs::path(options.out_dir) / name).string();
    save_y4m(source, source_path);

    json entry;
    entry["source"] = name;
    entry["transcoded"] = json::array();
    entry["mos"] = json::array();

    for (int v = 0; v < options.versions; ++v) {
      const int quality = 75 - v * 20;  // 75, 55, 35, 15, ...
      VideoClip transcoded = transform_luma(source, [&](const Plane& p, int) {
        return block_dct_compress(p, std::max(quality, 2));
      });
      std::snprintf(name, sizeof(name), "src_%03d_q%02d.y4m", s, std::max(quality, 2));
      save_y4m(transcoded, (fs::path(options.out_dir) / name).string());

      // Oracle quality: mean VIF against the hidden pristine clip.
      double vif_sum = 0.0;
      for (int f = 0; f < pristine.frame_count(); ++f)
        vif_sum += vif_map(pristine.luma[f], transcoded.luma[f]).mean();
      const double oracle = vif_sum / pristine.frame_count();
      double mos = 1.0 + 4.0 * oracle + options.label_noise * label_rng.next_normal();
      mos = std::clamp(mos, 1.0, 5.0);

      entry["transcoded"].push_back(name);
      entry["mos"].push_back(mos);
    }
    manifest.push_back(std::move(entry));
  }

  const std::string manifest_path = (fs::path(options.out_dir) / "manifest.json").string();
  json root;
  root["videos"] = std::move(manifest);
  write_text_file(manifest_path, root.dump(2));
  return manifest_path;
}

}  // namespace uvqa
