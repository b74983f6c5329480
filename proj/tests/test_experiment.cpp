// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "test_util.hpp"
#include "uvqa/distort.hpp"
#include "uvqa/experiment.hpp"

using namespace uvqa;

TEST_CASE("make_splits: sizes, determinism, disjointness over many seeds") {
  SourceSplits s = make_splits(10, 0.6, 0.2, 0.2, 1);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);

  SourceSplits again = make_splits(10, 0.6, 0.2, 0.2, 1);
  CHECK(s.train == again.train);
  CHECK(s.val == again.val);
  CHECK(s.test == again.test);

  // remainder-to-train rule
  SourceSplits odd = make_splits(11, 0.6, 0.2, 0.2, 2);
  CHECK(odd.val.size() == 2);
  CHECK(odd.test.size() == 2);
  CHECK(odd.train.size() == 7);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SourceSplits sp = make_splits(12, 0.6, 0.2, 0.2, seed);
    std::set<int> all;
    for (int i : sp.train) all.insert(i);
    for (int i : sp.val) all.insert(i);
    for (int i : sp.test) all.insert(i);
    CHECK(all.size() == 12);  // pairwise disjoint and complete
  }

  CHECK_THROWS_AS(make_splits(4, 0.6, 0.2, 0.2, 0), Error);
  CHECK_THROWS_AS(make_splits(10, 0.5, 0.2, 0.2, 0), Error);
}

TEST_CASE("report: aggregation, JSON round-trip, CSV rows") {
  RunReport report;
  report.method = "demo";
  for (int r = 0; r < 4; ++r) {
    RepeatResult row;
    row.repeat = r;
    row.srocc = 0.8 + 0.02 * r;
    row.plcc = 0.7 + 0.03 * r;
    row.rmse = 0.5 - 0.05 * r;
    row.best_epoch = r;
    report.repeats.push_back(row);
  }
  report.aggregate();
  CHECK(report.srocc_mean == doctest::Approx(0.83));
  CHECK(report.srocc_std ==
        doctest::Approx(stddev_of({0.8, 0.82, 0.84, 0.86})));

  RunReport round = RunReport::from_json(report.to_json());
  CHECK(round.method == "demo");
  REQUIRE(round.repeats.size() == 4);
  CHECK(round.repeats[2].srocc == doctest::Approx(0.84));
  CHECK(round.srocc_mean == doctest::Approx(report.srocc_mean));

  std::string csv = report.to_csv();
  CHECK(csv.find("repeat,srocc,plcc,rmse") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("plotdata: quantiles match the percentile oracle") {
  RunReport report;
  report.method = "m";
  std::vector<double> values;
  for (int r = 0; r < 20; ++r) {
    RepeatResult row;
    row.repeat = r;
    row.srocc = 0.5 + 0.017 * r;
    row.plcc = row.srocc;
    row.rmse = 1.0 - 0.01 * r;
    values.push_back(row.srocc);
    report.repeats.push_back(row);
  }
  report.aggregate();
  std::string plot = reports_plotdata({report});
  char expected[64];
  std::snprintf(expected, sizeof(expected), "\"p50\": %.*g", 10, percentile(values, 0.5));
  // parse-free check: the serialized p50 equals the oracle percentile
  CHECK(plot.find("\"p50\"") != std::string::npos);
  RunReport single;
  single.method = "one";
  RepeatResult only;
  only.srocc = only.plcc = only.rmse = 0.42;
  single.repeats.push_back(only);
  single.aggregate();
  std::string one = reports_plotdata({single});
  // with one repeat every quantile equals that value
  CHECK(one.find("0.42") != std::string::npos);
  CHECK(one.find("\"p25\": 0.42") != std::string::npos);
  CHECK(one.find("\"p75\": 0.42") != std::string::npos);
}

TEST_CASE("manifest: parsing and validation") {
  std::string good = R"({"videos":[
    {"source":"a.y4m","transcoded":["a1.y4m","a2.y4m"],"mos":[4.0,2.5]}]})";
  Manifest m = Manifest::parse(good);
  REQUIRE(m.videos.size() == 1);
  CHECK(m.videos[0].transcoded.size() == 2);
  CHECK(m.videos[0].mos[1] == doctest::Approx(2.5));

  CHECK_THROWS_AS(Manifest::parse("{}"), Error);
  CHECK_THROWS_AS(
      Manifest::parse(R"([{"source":"a","transcoded":["b"],"mos":[1.0,2.0]}])"), Error);
}

TEST_CASE("config: key=value overrides") {
  ExperimentConfig config;
  config.apply("repeats", "7");
  config.apply("stack", "vmaf_style");
  config.apply("ablation", "no_source_maps");
  config.apply("learning_rate", "0.01");
  config.apply("downsample", "2");
  CHECK(config.repeats == 7);
  CHECK(config.stack == StackKind::vmaf_style);
  CHECK(config.ablation == AblationMode::replace_source_maps);
  CHECK(config.learning_rate == doctest::Approx(0.01));
  CHECK(config.downsample == 2);
  CHECK_THROWS_AS(config.apply("bogus", "1"), Error);

  ExperimentConfig bad;
  bad.train_ratio = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("demo corpus: deterministic manifest with plausible proxy labels") {
  testutil::TempDir tmp("demo");
  DemoCorpusOptions options;
  options.out_dir = tmp.path.string();
  options.sources = 5;
  options.versions = 3;
  options.frames = 4;
  options.size = 48;
  options.seed = 9;
  std::string manifest_path = make_demo_corpus(options);
  Manifest manifest = Manifest::load(manifest_path);
  REQUIRE(manifest.videos.size() == 5);
  for (const auto& v : manifest.videos) {
    REQUIRE(v.transcoded.size() == 3);
    VideoClip src = load_y4m(v.source);
    CHECK(src.frame_count() == 4);
    CHECK(src.width() == 48);
    double prev = 10.0;
    for (std::size_t i = 0; i < v.transcoded.size(); ++i) {
      CHECK(v.mos[i] >= 1.0);
      CHECK(v.mos[i] <= 5.0);
      VideoClip t = load_y4m(v.transcoded[i]);
      CHECK(t.frame_count() == 4);
      // heavier compression levels should not raise the proxy label by much
      CHECK(v.mos[i] <= prev + 0.35);
      prev = v.mos[i];
    }
  }
}

TEST_CASE("run_experiment: single repeat on a tiny corpus, deterministic") {
  testutil::TempDir tmp("exp");
  DemoCorpusOptions corpus;
  corpus.out_dir = (tmp.path / "corpus").string();
  corpus.sources = 6;
  corpus.versions = 2;
  corpus.frames = 3;
  corpus.size = 48;
  corpus.seed = 4;
  std::string manifest_path = make_demo_corpus(corpus);

  // quick generator: a couple of epochs on a tiny synthetic patch corpus
  CorpusOptions patches;
  patches.output_dir = (tmp.path / "patches").string();
  patches.count = 6;
  patches.texture_size = 80;
  patches.seed = 5;
  build_distorted_corpus(patches);
  PatchDataset dataset = load_patch_dataset(patches.output_dir);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.seed = 6;
  GeneratorNet generator(1, 4, tc.seed);
  train_generator(generator, dataset, tc);
  save_generator(generator, (tmp.path / "gen.uvqa").string());

  ExperimentConfig config;
  config.manifest_path = manifest_path;
  config.generator_weights = (tmp.path / "gen.uvqa").string();
  config.repeats = 1;
  config.epochs = 2;
  config.frame_count = 2;
  config.downsample = 2;
  config.pooling_width = 4;
  config.batch_size = 4;
  config.seed = 11;

  RunReport report = run_experiment(config);
  REQUIRE(report.repeats.size() == 1);
  CHECK(report.srocc_mean == doctest::Approx(report.repeats[0].srocc));
  CHECK(report.repeats[0].best_epoch >= 0);
  CHECK(report.repeats[0].srocc >= -1.0);
  CHECK(report.repeats[0].srocc <= 1.0);

  RunReport again = run_experiment(config);
  CHECK(again.repeats[0].srocc == report.repeats[0].srocc);
  CHECK(again.repeats[0].plcc == report.repeats[0].plcc);
  CHECK(again.repeats[0].rmse == report.repeats[0].rmse);
  CHECK(again.to_json() == report.to_json());

  // threads only parallelize the stack precompute; results are identical
  ExperimentConfig threaded = config;
  threaded.threads = 2;
  RunReport parallel = run_experiment(threaded);
  CHECK(parallel.repeats[0].srocc == report.repeats[0].srocc);
}
