// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace uvqa {

void ScoreMatrix::validate() const {
  require(!subjects.empty() && !presentations.empty(), ErrorCode::invalid_arg,
          "empty score matrix");
  require(scores.size() == subjects.size() * presentations.size(),
          ErrorCode::invalid_arg, "score grid size mismatch");
  for (int s : scores)
    require(s >= 1 && s <= 5, ErrorCode::invalid_arg,
            "score " + std::to_string(s) + " outside the five-grade scale");
}

ScoreMatrix parse_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::format, "empty CSV");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream fs(s);
    while (std::getline(fs, field, ',')) {
      // trim surrounding spaces
      std::size_t a = field.find_first_not_of(" \t\r");
      std::size_t b = field.find_last_not_of(" \t\r");
      out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    return out;
  };

  auto header = split(line);
  require(header.size() >= 3 && header[0] == "subject_id" &&
              header[1] == "presentation_id" && header[2] == "score",
          ErrorCode::format,
          "expected header: subject_id,presentation_id,score[,source_id,is_ref]");
  const bool has_meta = header.size() >= 5;

  std::map<std::string, int> subject_index, presentation_index;
  ScoreMatrix matrix;
  struct Row {
    int subject, presentation, score;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    require(fields.size() >= 3, ErrorCode::format,
            "line " + std::to_string(line_no) + ": expected at least 3 fields");
    auto [sit, s_new] = subject_index.try_emplace(
        fields[0], static_cast<int>(matrix.subjects.size()));
    if (s_new) matrix.subjects.push_back(fields[0]);
    auto [pit, p_new] = presentation_index.try_emplace(
        fields[1], static_cast<int>(matrix.presentations.size()));
    if (p_new) {
      Presentation p;
      p.id = fields[1];
      if (has_meta && fields.size() >= 5) {
        p.source_id = fields[3];
        p.is_hidden_reference = fields[4] == "1" || fields[4] == "true";
      }
      matrix.presentations.push_back(p);
    }
    rows.push_back({sit->second, pit->second, std::atoi(fields[2].c_str())});
  }

  matrix.scores.assign(matrix.subjects.size() * matrix.presentations.size(), 0);
  std::vector<char> seen(matrix.scores.size(), 0);
  for (const Row& r : rows) {
    std::size_t idx =
        static_cast<std::size_t>(r.subject) * matrix.presentations.size() + r.presentation;
    require(!seen[idx], ErrorCode::format,
            "duplicate rating for subject '" + matrix.subjects[r.subject] +
                "', presentation '" + matrix.presentations[r.presentation].id + "'");
    seen[idx] = 1;
    matrix.scores[idx] = r.score;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    require(seen[i], ErrorCode::format, "missing rating: subject '" +
                                            matrix.subjects[i / matrix.presentations.size()] +
                                            "', presentation '" +
                                            matrix.presentations[i % matrix.presentations.size()].id +
                                            "'");
  matrix.validate();
  return matrix;
}

std::vector<double> mos(const ScoreMatrix& matrix) {
  matrix.validate();
  std::vector<double> out(matrix.presentation_count(), 0.0);
  for (int p = 0; p < matrix.presentation_count(); ++p) {
    double sum = 0.0;
    for (int s = 0; s < matrix.subject_count(); ++s) sum += matrix.score(s, p);
    out[p] = sum / matrix.subject_count();
  }
  return out;
}

std::vector<double> dmos(const ScoreMatrix& matrix) {
  matrix.validate();
  // Locate the hidden reference of every source.
  std::map<std::string, int> reference_of;
  for (int p = 0; p < matrix.presentation_count(); ++p)
    if (matrix.presentations[p].is_hidden_reference)
      reference_of[matrix.presentations[p].source_id] = p;

  std::vector<double> out(matrix.presentation_count(), 0.0);
  for (int p = 0; p < matrix.presentation_count(); ++p) {
    const std::string& source = matrix.presentations[p].source_id;
    auto it = reference_of.find(source);
    require(it != reference_of.end(), ErrorCode::invalid_arg,
            "no hidden reference for source '" + source + "'");
    double sum = 0.0;
    for (int s = 0; s < matrix.subject_count(); ++s)
      sum += matrix.score(s, p) - matrix.score(s, it->second) + 5;
    out[p] = sum / matrix.subject_count();
  }
  return out;
}

ScreeningResult screen_subjects(const ScoreMatrix& matrix) {
  matrix.validate();
  require(matrix.subject_count() >= 2, ErrorCode::invalid_arg,
          "screening requires at least 2 subjects");
  const int subjects = matrix.subject_count();
  const int presentations = matrix.presentation_count();

  std::vector<double> upper(presentations), lower(presentations);
  for (int p = 0; p < presentations; ++p) {
    double m1 = 0.0;
    for (int s = 0; s < subjects; ++s) m1 += matrix.score(s, p);
    m1 /= subjects;
    double m2 = 0.0, m4 = 0.0;
    for (int s = 0; s < subjects; ++s) {
      double d = matrix.score(s, p) - m1;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    m2 /= subjects;
    m4 /= subjects;
    const double sigma = std::sqrt(m2);
    // Kurtosis in [2,4] -> treated as normally distributed.
    const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
    const double k = (kurtosis >= 2.0 && kurtosis <= 4.0) ? 2.0 : std::sqrt(20.0);
    upper[p] = m1 + k * sigma;
    lower[p] = m1 - k * sigma;
  }

  ScreeningResult result;
  result.diagnostics.resize(subjects);
  const double total = static_cast<double>(presentations);
  for (int s = 0; s < subjects; ++s) {
    SubjectDiagnostics& d = result.diagnostics[s];
    for (int p = 0; p < presentations; ++p) {
      if (matrix.score(s, p) > upper[p]) ++d.above;
      if (matrix.score(s, p) < lower[p]) ++d.below;
    }
    const int pq = d.above + d.below;
    d.outlier_ratio = pq / total;
    d.direction_ratio = pq > 0 ? std::abs(static_cast<double>(d.above - d.below)) / pq : 1.0;
    d.rejected = d.outlier_ratio > 0.05 && d.direction_ratio < 0.3;
    (d.rejected ? result.rejected : result.retained).push_back(s);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Logistic fitting

namespace {

// Stable 1/(1+exp(z)).
double inv_logit(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

struct Residuals {
  double sse = 0.0;
};

double sse_of(const std::vector<double>& x, const std::vector<double>& y,
              const double beta[5]) {
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double l = inv_logit(beta[1] * (x[i] - beta[2]));
    double f = beta[0] * (0.5 - l) + beta[3] * x[i] + beta[4];
    double r = f - y[i];
    sse += r * r;
  }
  return sse;
}

// In-place Gaussian elimination with partial pivoting, N in {3,5}.
template <int N>
bool solve_dense(double a[N][N], double b[N], double out[N]) {
  int perm[N];
  for (int i = 0; i < N; ++i) perm[i] = i;
  for (int col = 0; col < N; ++col) {
    int pivot = col;
    for (int r = col + 1; r < N; ++r)
      if (std::abs(a[perm[r]][col]) > std::abs(a[perm[pivot]][col])) pivot = r;
    std::swap(perm[col], perm[pivot]);
    double diag = a[perm[col]][col];
    if (std::abs(diag) < 1e-300) return false;
    for (int r = col + 1; r < N; ++r) {
      double f = a[perm[r]][col] / diag;
      for (int c = col; c < N; ++c) a[perm[r]][c] -= f * a[perm[col]][c];
      b[perm[r]] -= f * b[perm[col]];
    }
  }
  for (int col = N - 1; col >= 0; --col) {
    double acc = b[perm[col]];
    for (int c = col + 1; c < N; ++c) acc -= a[perm[col]][c] * out[c];
    out[col] = acc / a[perm[col]][col];
  }
  return true;
}

bool solve5(double a[5][5], double b[5], double out[5]) {
  return solve_dense<5>(a, b, out);
}

// The model is linear in (b1, b4, b5) for fixed (b2, b3); projecting onto
// that subspace (variable-projection style) gives the exact optimum of the
// linear coordinates and never increases the residual. In particular, data
// that is exactly linear lands at residual zero immediately.
bool project_linear_coords(const std::vector<double>& x, const std::vector<double>& y,
                           double beta[5]) {
  double a[3][3] = {};
  double b[3] = {};
  for (std::size_t i = 0; i < x.size(); ++i) {
    double g = 0.5 - inv_logit(beta[1] * (x[i] - beta[2]));
    const double basis[3] = {g, x[i], 1.0};
    for (int r = 0; r < 3; ++r) {
      b[r] += basis[r] * y[i];
      for (int c = 0; c < 3; ++c) a[r][c] += basis[r] * basis[c];
    }
  }
  double theta[3];
  if (!solve_dense<3>(a, b, theta)) return false;
  double candidate[5] = {theta[0], beta[1], beta[2], theta[1], theta[2]};
  for (int i = 0; i < 5; ++i)
    if (!std::isfinite(candidate[i])) return false;
  if (sse_of(x, y, candidate) <= sse_of(x, y, beta)) {
    std::copy(candidate, candidate + 5, beta);
    return true;
  }
  return false;
}

}  // namespace

double logistic_eval(const LogisticParams& params, double x) {
  double l = inv_logit(params.beta[1] * (x - params.beta[2]));
  return params.beta[0] * (0.5 - l) + params.beta[3] * x + params.beta[4];
}

LogisticParams fit_logistic(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorCode::invalid_arg, "x/y size mismatch");
  const std::size_t n = x.size();
  require(n >= 5, ErrorCode::invalid_arg, "fit requires at least 5 points");

  const double x_mean = mean_of(x);
  const double x_std = stddev_of(x);
  require(x_std > 0.0, ErrorCode::invalid_arg, "constant objective scores");

  // Linear least squares for the b4*x + b5 part of the initialization.
  double sxx = 0.0, sxy = 0.0;
  const double y_mean = mean_of(y);
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - x_mean) * (x[i] - x_mean);
    sxy += (x[i] - x_mean) * (y[i] - y_mean);
  }
  const double slope = sxy / sxx;

  LogisticParams params;
  params.beta[0] = *std::max_element(y.begin(), y.end()) -
                   *std::min_element(y.begin(), y.end());
  params.beta[1] = 1.0 / x_std;
  params.beta[2] = x_mean;
  params.beta[3] = slope;
  params.beta[4] = y_mean - slope * x_mean;
  project_linear_coords(x, y, params.beta);

  double lambda = 1e-3;
  double sse = sse_of(x, y, params.beta);
  constexpr int kMaxIterations = 500;
  if (sse < 1e-22) {
    params.converged = true;
    params.residual_rmse = std::sqrt(sse / static_cast<double>(n));
    return params;
  }

  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    // Gauss-Newton matrices from the analytic Jacobian.
    double jtj[5][5] = {};
    double jtr[5] = {};
    for (std::size_t i = 0; i < n; ++i) {
      const double z = params.beta[1] * (x[i] - params.beta[2]);
      const double l = inv_logit(z);
      const double dl = l * (1.0 - l);
      const double f = params.beta[0] * (0.5 - l) + params.beta[3] * x[i] + params.beta[4];
      const double r = f - y[i];
      const double jac[5] = {0.5 - l,
                             params.beta[0] * dl * (x[i] - params.beta[2]),
                             -params.beta[0] * dl * params.beta[1],
                             x[i],
                             1.0};
      for (int a = 0; a < 5; ++a) {
        jtr[a] += jac[a] * r;
        for (int b = 0; b < 5; ++b) jtj[a][b] += jac[a] * jac[b];
      }
    }

    double max_diag = 0.0;
    for (int r = 0; r < 5; ++r) max_diag = std::max(max_diag, jtj[r][r]);

    bool stepped = false;
    for (int attempt = 0; attempt < 60 && !stepped; ++attempt) {
      double a[5][5];
      double b[5], delta[5];
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) a[r][c] = jtj[r][c];
        // Marquardt scaling with a relative floor: directions whose curvature
        // collapses (e.g. b2/b3 once b1 ~ 0) still receive real damping.
        a[r][r] += lambda * std::max(jtj[r][r], 1e-10 * max_diag + 1e-300);
        b[r] = -jtr[r];
      }
      if (solve5(a, b, delta)) {
        double candidate[5];
        for (int k = 0; k < 5; ++k) candidate[k] = params.beta[k] + delta[k];
        double candidate_sse = sse_of(x, y, candidate);
        if (std::isfinite(candidate_sse) && candidate_sse <= sse) {
          std::copy(candidate, candidate + 5, params.beta);
          project_linear_coords(x, y, params.beta);
          candidate_sse = sse_of(x, y, params.beta);
          double change = sse - candidate_sse;
          lambda = std::max(lambda / 3.0, 1e-12);
          stepped = true;
          if (change < 1e-10 * (sse + 1e-20) || candidate_sse < 1e-22)
            params.converged = true;
          sse = candidate_sse;
        } else {
          lambda *= 10.0;
        }
      } else {
        lambda *= 10.0;
      }
      if (lambda > 1e14) break;
    }
    if (params.converged || !stepped) {
      if (!stepped) params.converged = sse < 1e-18;  // stalled at the floor
      break;
    }
  }
  params.iterations = iter + 1;
  params.residual_rmse = std::sqrt(sse / static_cast<double>(n));
  return params;
}

// ---------------------------------------------------------------------------
// Correlations

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_arg,
          "pearson needs two equal-length vectors of size >= 2");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  CorrelationResult r;
  if (sxx <= 0.0 || syy <= 0.0) return r;
  r.value = sxy / std::sqrt(sxx * syy);
  r.defined = true;
  return r;
}

namespace {

// Average ranks, ties share the mean of their rank span.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

CorrelationResult srocc(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_arg,
          "srocc needs two equal-length vectors of size >= 2");
  return pearson(average_ranks(x), average_ranks(y));
}

PlccRmse plcc_rmse(const std::vector<double>& x, const std::vector<double>& y,
                   const LogisticParams* params) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_arg,
          "plcc needs two equal-length vectors of size >= 2");
  std::vector<double> mapped(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    mapped[i] = params ? logistic_eval(*params, x[i]) : x[i];
  PlccRmse out;
  out.plcc = pearson(mapped, y);
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sse += (mapped[i] - y[i]) * (mapped[i] - y[i]);
  out.rmse = std::sqrt(sse / static_cast<double>(x.size()));
  return out;
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), ErrorCode::invalid_arg, "empty sample");
  require(p >= 0.0 && p <= 1.0, ErrorCode::invalid_arg, "p must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

double mean_of(const std::vector<double>& values) {
  require(!values.empty(), ErrorCode::invalid_arg, "empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double stddev_of(const std::vector<double>& values) {
  const double m = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

}  // namespace uvqa
