// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "uvqa/common.hpp"

namespace uvqa {

struct Presentation {
  std::string id;
  std::string source_id;
  bool is_hidden_reference = false;
};

// Subjects x presentations grid of five-grade opinion scores.
struct ScoreMatrix {
  std::vector<std::string> subjects;
  std::vector<Presentation> presentations;
  std::vector<int> scores;  // row-major, subjects x presentations

  int subject_count() const { return static_cast<int>(subjects.size()); }
  int presentation_count() const { return static_cast<int>(presentations.size()); }
  int score(int subject, int presentation) const {
    return scores[static_cast<std::size_t>(subject) * presentations.size() + presentation];
  }
  void validate() const;
};

// CSV columns: subject_id, presentation_id, score[, source_id, is_ref].
// Header row required; every (subject, presentation) pair must be rated.
ScoreMatrix parse_scores_csv(const std::string& text);

std::vector<double> mos(const ScoreMatrix& matrix);

// ACR-HR differential scores: score(test) - score(hidden reference of the
// same source) + 5, averaged over subjects. In [1,9] by construction.
std::vector<double> dmos(const ScoreMatrix& matrix);

struct SubjectDiagnostics {
  int above = 0;  // P_i
  int below = 0;  // Q_i
  double outlier_ratio = 0.0;    // (P+Q)/(J*K)
  double direction_ratio = 0.0;  // |P-Q|/(P+Q), 1 when P+Q = 0
  bool rejected = false;
};

struct ScreeningResult {
  std::vector<int> retained;
  std::vector<int> rejected;
  std::vector<SubjectDiagnostics> diagnostics;
};

// BT.500-style screening: per presentation the score range is mean +- 2 sigma
// when the kurtosis lies in [2,4] (treated as normal), else mean +- sqrt(20)
// sigma; a subject is rejected when (P+Q)/(JK) > 0.05 and |P-Q|/(P+Q) < 0.3.
ScreeningResult screen_subjects(const ScoreMatrix& matrix);

// f(x) = b1*(1/2 - 1/(1+exp(b2*(x-b3)))) + b4*x + b5
struct LogisticParams {
  double beta[5] = {0, 0, 0, 0, 0};
  double residual_rmse = 0.0;
  bool converged = false;
  int iterations = 0;
};

double logistic_eval(const LogisticParams& params, double x);

// Levenberg-Marquardt least squares with the deterministic initialization
// b = (max(y)-min(y), 1/std(x), mean(x), linear slope, linear intercept).
// Accepted steps never increase the residual; stops when the relative
// residual change drops below 1e-10 or after 500 iterations.
LogisticParams fit_logistic(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationResult {
  double value = 0.0;
  bool defined = false;  // false when an argument is constant
};

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation; ties receive their mean rank.
CorrelationResult srocc(const std::vector<double>& x, const std::vector<double>& y);

struct PlccRmse {
  CorrelationResult plcc;
  double rmse = 0.0;
};

// PLCC and RMSE between f(x) (or raw x when params is null) and y.
PlccRmse plcc_rmse(const std::vector<double>& x, const std::vector<double>& y,
                   const LogisticParams* params);

// Type-7 (linear interpolation) percentile, p in [0,1].
double percentile(std::vector<double> values, double p);

double mean_of(const std::vector<double>& values);
double stddev_of(const std::vector<double>& values);  // population

}  // namespace uvqa
