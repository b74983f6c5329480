// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/stats.hpp"

using namespace uvqa;

namespace {

ScoreMatrix matrix_from(std::vector<std::string> subjects,
                        std::vector<Presentation> presentations,
                        std::vector<int> scores) {
  ScoreMatrix m;
  m.subjects = std::move(subjects);
  m.presentations = std::move(presentations);
  m.scores = std::move(scores);
  m.validate();
  return m;
}

Presentation pres(std::string id, std::string source = "", bool ref = false) {
  Presentation p;
  p.id = std::move(id);
  p.source_id = std::move(source);
  p.is_hidden_reference = ref;
  return p;
}

// Independent Spearman via the closed form with tie correction: Pearson on
// ranks computed with a separate sorting routine.
double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rank_of = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) ++less;
        if (v[j] == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;  // average rank among ties
    }
    return r;
  };
  auto rx = rank_of(x), ry = rank_of(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= rx.size();
  my /= ry.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("mos: unanimous fives and a hand-computed toy matrix") {
  ScoreMatrix all5 = matrix_from({"a", "b"}, {pres("p1"), pres("p2")}, {5, 5, 5, 5});
  for (double v : mos(all5)) CHECK(v == doctest::Approx(5.0));

  ScoreMatrix toy = matrix_from({"a", "b", "c"}, {pres("p1"), pres("p2")},
                                {1, 4, 3, 5, 2, 3});
  auto means = mos(toy);
  CHECK(means[0] == doctest::Approx(2.0));
  CHECK(means[1] == doctest::Approx(4.0));
}

TEST_CASE("dmos: ACR-HR differential scores") {
  // two sources with hidden references; test scores equal the reference -> 5.0
  ScoreMatrix equal = matrix_from(
      {"a", "b"},
      {pres("s1_ref", "s1", true), pres("s1_t1", "s1"), pres("s2_ref", "s2", true),
       pres("s2_t1", "s2")},
      {4, 4, 3, 3, 2, 2, 5, 5});
  auto d = dmos(equal);
  CHECK(d[1] == doctest::Approx(5.0));
  CHECK(d[3] == doctest::Approx(5.0));
  CHECK(d[0] == doctest::Approx(5.0));  // the reference against itself

  // hand computation: subject a: 3-4+5=4, subject b: 2-5+5=2 -> mean 3
  ScoreMatrix toy = matrix_from({"a", "b"},
                                {pres("ref", "s", true), pres("t", "s")},
                                {4, 3, 5, 2});
  CHECK(dmos(toy)[1] == doctest::Approx(3.0));
  CHECK(dmos(toy)[1] >= 1.0);
  CHECK(dmos(toy)[1] <= 9.0);

  ScoreMatrix no_ref = matrix_from({"a", "b"}, {pres("t", "s")}, {4, 3});
  CHECK_THROWS_AS(dmos(no_ref), Error);
}

TEST_CASE("screening: unanimous panels reject nobody") {
  std::vector<int> scores;
  std::vector<Presentation> ps;
  for (int p = 0; p < 10; ++p) ps.push_back(pres("p" + std::to_string(p)));
  for (int s = 0; s < 5; ++s)
    for (int p = 0; p < 10; ++p) scores.push_back(3);
  ScreeningResult r = screen_subjects(matrix_from(
      {"s0", "s1", "s2", "s3", "s4"}, std::move(ps), std::move(scores)));
  CHECK(r.rejected.empty());
  CHECK(r.retained.size() == 5);
  for (const auto& d : r.diagnostics) {
    CHECK(d.above == 0);
    CHECK(d.below == 0);
  }
}

TEST_CASE("screening: bidirectional outlier rejected, uniform bias retained") {
  // A realistic panel size keeps the per-presentation bounds tight enough to
  // expose the planted subjects: 26 normals spread binomially over {2,3,4},
  // one subject alternating 1/5 on every presentation, one scoring 5 always.
  const int presentations = 40;
  const int normals = 26;
  std::vector<Presentation> ps;
  for (int p = 0; p < presentations; ++p) ps.push_back(pres("p" + std::to_string(p)));

  std::vector<std::string> subjects;
  for (int s = 0; s < normals; ++s) subjects.push_back("n" + std::to_string(s));
  subjects.push_back("bidir");
  subjects.push_back("high");

  std::vector<int> scores;
  std::vector<std::vector<int>> rows(normals + 2, std::vector<int>(presentations));
  for (int s = 0; s < normals; ++s)
    for (int p = 0; p < presentations; ++p)
      rows[s][p] = 3 + ((s + p) % 4 == 0 ? 1 : 0) - ((s + p) % 4 == 1 ? 1 : 0);
  for (int p = 0; p < presentations; ++p) rows[normals][p] = (p % 2 == 0) ? 1 : 5;
  for (int p = 0; p < presentations; ++p) rows[normals + 1][p] = 5;
  for (const auto& row : rows) scores.insert(scores.end(), row.begin(), row.end());

  ScreeningResult r = screen_subjects(matrix_from(subjects, ps, scores));

  const SubjectDiagnostics& bidir = r.diagnostics[normals];
  CHECK(bidir.rejected);
  CHECK(bidir.outlier_ratio > 0.05);
  CHECK(bidir.direction_ratio < 0.3);

  // the uniformly-high scorer fails Eq. 7's second condition: all deviations
  // point the same way, |P-Q|/(P+Q) = 1 >= 0.3
  const SubjectDiagnostics& high = r.diagnostics[normals + 1];
  CHECK(!high.rejected);
  CHECK(high.above > 0);
  CHECK(high.direction_ratio == doctest::Approx(1.0));

  for (int s = 0; s < normals; ++s) CHECK(!r.diagnostics[s].rejected);
}

TEST_CASE("screening: zero-variance presentations keep equal scores inside") {
  ScoreMatrix m = matrix_from({"a", "b", "c"}, {pres("p1"), pres("p2")},
                              {3, 1, 3, 5, 3, 3});
  ScreeningResult r = screen_subjects(m);
  for (const auto& d : r.diagnostics) CHECK(d.above + d.below <= 1);
}

TEST_CASE("fit: exactly linear data reaches zero residual") {
  std::vector<double> x = {0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> y = x;
  LogisticParams params = fit_logistic(x, y);
  CHECK(params.residual_rmse < 1e-8);
  for (double v : x) CHECK(logistic_eval(params, v) == doctest::Approx(v).epsilon(1e-6));
}

TEST_CASE("fit: recovers a known logistic within 1e-6 function values") {
  LogisticParams truth;
  truth.beta[0] = 2.5;
  truth.beta[1] = 1.8;
  truth.beta[2] = 0.4;
  truth.beta[3] = 0.3;
  truth.beta[4] = 2.0;
  std::vector<double> x, y;
  for (int i = 0; i <= 30; ++i) {
    double v = -2.0 + i * (4.0 / 30.0);
    x.push_back(v);
    y.push_back(logistic_eval(truth, v));
  }
  LogisticParams fitted = fit_logistic(x, y);
  CHECK(fitted.converged);
  for (double v : x)
    CHECK(logistic_eval(fitted, v) == doctest::Approx(logistic_eval(truth, v)).epsilon(1e-6));
}

TEST_CASE("fit: preconditions") {
  std::vector<double> constant = {1, 1, 1, 1, 1, 1};
  std::vector<double> y = {1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(fit_logistic(constant, y), Error);
  std::vector<double> tiny = {1, 2};
  CHECK_THROWS_AS(fit_logistic(tiny, {1, 2}), Error);
}

TEST_CASE("fit: accepted steps never increase the residual") {
  // monotone data with noise; re-fit and confirm the final RMSE is no worse
  // than the RMSE at the deterministic initialization
  CounterRng rng(23);
  std::vector<double> x, y;
  for (int i = 0; i < 25; ++i) {
    double v = i * 0.2;
    x.push_back(v);
    y.push_back(1.0 + 3.0 / (1.0 + std::exp(-1.5 * (v - 2.5))) + 0.05 * rng.next_normal());
  }
  LogisticParams fitted = fit_logistic(x, y);
  // initialization replicated per the documented rule
  LogisticParams init;
  init.beta[0] = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
  init.beta[1] = 1.0 / stddev_of(x);
  init.beta[2] = mean_of(x);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_of(x)) * (x[i] - mean_of(x));
    sxy += (x[i] - mean_of(x)) * (y[i] - mean_of(y));
  }
  init.beta[3] = sxy / sxx;
  init.beta[4] = mean_of(y) - init.beta[3] * mean_of(x);
  double init_sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = logistic_eval(init, x[i]) - y[i];
    init_sse += r * r;
  }
  CHECK(fitted.residual_rmse <= std::sqrt(init_sse / x.size()) + 1e-12);
}

TEST_CASE("srocc: exact hand values") {
  CHECK(srocc({1, 2, 3, 4, 5}, {10, 20, 30, 40, 50}).value == doctest::Approx(1.0));
  CHECK(srocc({1, 2, 3, 4, 5}, {50, 40, 30, 20, 10}).value == doctest::Approx(-1.0));
  CHECK(srocc({1, 2, 3, 4}, {1, 3, 2, 4}).value == doctest::Approx(0.8));
  CHECK(!srocc({2, 2, 2}, {1, 2, 3}).defined);
}

TEST_CASE("srocc: tied data matches the independent rank oracle") {
  CounterRng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
      x.push_back(static_cast<double>(rng.next_below(6)));  // heavy ties
      y.push_back(static_cast<double>(rng.next_below(6)));
    }
    CorrelationResult r = srocc(x, y);
    if (!r.defined) continue;
    CHECK(r.value == doctest::Approx(oracle_spearman(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("srocc: invariant under strictly increasing transforms") {
  CounterRng rng(37);
  std::vector<double> x, y;
  for (int i = 0; i < 15; ++i) {
    x.push_back(rng.next_uniform(0.0, 10.0));
    y.push_back(rng.next_uniform(0.0, 10.0));
  }
  double base = srocc(x, y).value;
  std::vector<double> tx = x, ty = y;
  for (auto& v : tx) v = std::exp(v / 3.0);
  for (auto& v : ty) v = std::pow(v, 3) + 7.0;
  CHECK(srocc(tx, y).value == doctest::Approx(base));
  CHECK(srocc(x, ty).value == doctest::Approx(base));
  CHECK(srocc(tx, ty).value == doctest::Approx(base));
}

TEST_CASE("plcc/rmse: exact mapping and sign") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y = {1, 2, 3, 4, 5};
  PlccRmse exact = plcc_rmse(x, y, nullptr);
  CHECK(exact.plcc.value == doctest::Approx(1.0));
  CHECK(exact.rmse == doctest::Approx(0.0));

  std::vector<double> neg = {5, 4, 3, 2, 1};
  CHECK(plcc_rmse(x, neg, nullptr).plcc.value == doctest::Approx(-1.0));
}

TEST_CASE("plcc: fitting never hurts on monotone data") {
  CounterRng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 25; ++i) {
      double v = i * 0.3 + rng.next_uniform(0.0, 0.05);
      x.push_back(v);
      // saturating monotone response plus noise
      y.push_back(4.0 / (1.0 + std::exp(-0.9 * (v - 3.5))) + 1.0 + 0.1 * rng.next_normal());
    }
    LogisticParams params = fit_logistic(x, y);
    double raw = plcc_rmse(x, y, nullptr).plcc.value;
    double mapped = plcc_rmse(x, y, &params).plcc.value;
    CHECK(mapped >= raw - 1e-9);
  }
}

TEST_CASE("percentile: interpolation against direct formula") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(percentile(v, 0.0) == doctest::Approx(1.0));
  CHECK(percentile(v, 1.0) == doctest::Approx(4.0));
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
  CHECK(percentile(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("scores CSV parsing") {
  std::string csv =
      "subject_id,presentation_id,score,source_id,is_ref\n"
      "a,ref1,4,s1,1\n"
      "a,t1,3,s1,0\n"
      "b,ref1,5,s1,1\n"
      "b,t1,2,s1,0\n";
  ScoreMatrix m = parse_scores_csv(csv);
  CHECK(m.subject_count() == 2);
  CHECK(m.presentation_count() == 2);
  CHECK(m.presentations[0].is_hidden_reference);
  CHECK(m.score(1, 1) == 2);
  auto d = dmos(m);
  CHECK(d[1] == doctest::Approx(0.5 * ((3 - 4 + 5) + (2 - 5 + 5))));

  CHECK_THROWS_AS(parse_scores_csv("subject_id,presentation_id,score\na,p,3\na,p,4\n"),
                  Error);  // duplicate
  CHECK_THROWS_AS(parse_scores_csv("subject_id,presentation_id,score\na,p,3\nb,q,4\n"),
                  Error);  // missing combinations
}
