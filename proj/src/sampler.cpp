// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uvqa/rng.hpp"

namespace uvqa {

SubsetProblem SubsetProblem::uniform_target(int item_count, int dims, int bins,
                                            int subset_size,
                                            std::vector<double> features) {
  SubsetProblem p;
  p.item_count = item_count;
  p.dims = dims;
  p.bins = bins;
  p.subset_size = subset_size;
  p.features = std::move(features);
  p.target_pmf.assign(static_cast<std::size_t>(bins) * dims, 1.0 / bins);
  p.validate();
  return p;
}

void SubsetProblem::validate() const {
  require(item_count >= 1 && dims >= 1 && bins >= 1, ErrorCode::invalid_arg,
          "problem dimensions must be positive");
  require(subset_size >= 1 && subset_size <= item_count, ErrorCode::invalid_arg,
          "subset size must be in [1, item count]");
  require(features.size() == static_cast<std::size_t>(item_count) * dims,
          ErrorCode::invalid_arg, "feature matrix size mismatch");
  require(target_pmf.size() == static_cast<std::size_t>(bins) * dims,
          ErrorCode::invalid_arg, "target PMF size mismatch");
  for (int m = 0; m < dims; ++m) {
    double sum = 0.0;
    for (int h = 0; h < bins; ++h) sum += target(h, m);
    require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::invalid_arg,
            "target PMF column " + std::to_string(m) + " sums to " + std::to_string(sum));
  }
}

BinMatrices quantize(const SubsetProblem& problem) {
  problem.validate();
  BinMatrices binned;
  binned.bins = problem.bins;
  binned.dims = problem.dims;
  binned.assignment.assign(static_cast<std::size_t>(problem.item_count) * problem.dims, 0);
  for (int m = 0; m < problem.dims; ++m) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < problem.item_count; ++k) {
      lo = std::min(lo, problem.feature(k, m));
      hi = std::max(hi, problem.feature(k, m));
    }
    if (hi <= lo) continue;  // degenerate dimension: everything in bin 0
    double scale = problem.bins / (hi - lo);
    for (int k = 0; k < problem.item_count; ++k) {
      int b = static_cast<int>(std::floor((problem.feature(k, m) - lo) * scale));
      binned.assignment[static_cast<std::size_t>(k) * problem.dims + m] =
          std::clamp(b, 0, problem.bins - 1);
    }
  }
  return binned;
}

namespace {

// Bin-count state for a growing/shrinking selection; objective deltas for
// add/remove are O(M).
class CountState {
 public:
  CountState(const BinMatrices& binned, const SubsetProblem& problem)
      : binned_(binned), problem_(problem),
        counts_(static_cast<std::size_t>(problem.bins) * problem.dims, 0) {
    objective_ = 0.0;
    for (int m = 0; m < problem_.dims; ++m)
      for (int h = 0; h < problem_.bins; ++h) objective_ += target_abs(h, m, 0);
  }

  double objective_value() const { return objective_; }

  void add(int item) { apply(item, +1); }
  void remove(int item) { apply(item, -1); }

  // Objective after adding `item`, without mutating state.
  double objective_if_added(int item) const {
    double obj = objective_;
    for (int m = 0; m < problem_.dims; ++m) {
      int h = binned_.bin_of(item, m);
      int c = counts_[idx(h, m)];
      obj += target_abs(h, m, c + 1) - target_abs(h, m, c);
    }
    return obj;
  }

  double objective_if_swapped(int out_item, int in_item) const {
    double obj = objective_;
    for (int m = 0; m < problem_.dims; ++m) {
      int h_out = binned_.bin_of(out_item, m);
      int h_in = binned_.bin_of(in_item, m);
      if (h_out == h_in) continue;
      int c_out = counts_[idx(h_out, m)];
      int c_in = counts_[idx(h_in, m)];
      obj += target_abs(h_out, m, c_out - 1) - target_abs(h_out, m, c_out);
      obj += target_abs(h_in, m, c_in + 1) - target_abs(h_in, m, c_in);
    }
    return obj;
  }

 private:
  std::size_t idx(int h, int m) const {
    return static_cast<std::size_t>(h) * problem_.dims + m;
  }

  double target_abs(int h, int m, int count) const {
    return std::abs(count - problem_.subset_size * problem_.target(h, m));
  }

  void apply(int item, int delta) {
    for (int m = 0; m < problem_.dims; ++m) {
      int h = binned_.bin_of(item, m);
      int c = counts_[idx(h, m)];
      objective_ += target_abs(h, m, c + delta) - target_abs(h, m, c);
      counts_[idx(h, m)] = c + delta;
    }
  }

  const BinMatrices& binned_;
  const SubsetProblem& problem_;
  std::vector<int> counts_;
  double objective_;
};

SelectionVector finish(std::vector<int> selected, double obj) {
  std::sort(selected.begin(), selected.end());
  return SelectionVector{std::move(selected), obj};
}

// Best-improvement 1-swap descent from the given subset. Ties break on the
// lowest (outgoing, incoming) index pair.
SelectionVector local_descent(const SubsetProblem& problem, const BinMatrices& binned,
                              std::vector<int> selected) {
  std::vector<char> in_subset(problem.item_count, 0);
  CountState state(binned, problem);
  for (int item : selected) {
    in_subset[item] = 1;
    state.add(item);
  }
  bool improved = true;
  while (improved) {
    improved = false;
    double best_obj = state.objective_value();
    int best_out = -1, best_in = -1;
    for (int out = 0; out < problem.item_count; ++out) {
      if (!in_subset[out]) continue;
      for (int in = 0; in < problem.item_count; ++in) {
        if (in_subset[in]) continue;
        double obj = state.objective_if_swapped(out, in);
        if (obj < best_obj - 1e-12) {
          best_obj = obj;
          best_out = out;
          best_in = in;
        }
      }
    }
    if (best_out >= 0) {
      state.remove(best_out);
      state.add(best_in);
      in_subset[best_out] = 0;
      in_subset[best_in] = 1;
      improved = true;
    }
  }
  std::vector<int> result;
  result.reserve(problem.subset_size);
  for (int k = 0; k < problem.item_count; ++k)
    if (in_subset[k]) result.push_back(k);
  // Recompute from scratch so incremental rounding never leaks out.
  double obj = objective(result, binned, problem);
  return finish(std::move(result), obj);
}

std::vector<int> greedy_construct(const SubsetProblem& problem, const BinMatrices& binned) {
  std::vector<char> in_subset(problem.item_count, 0);
  CountState state(binned, problem);
  std::vector<int> selected;
  selected.reserve(problem.subset_size);
  for (int step = 0; step < problem.subset_size; ++step) {
    double best_obj = std::numeric_limits<double>::infinity();
    int best_item = -1;
    for (int k = 0; k < problem.item_count; ++k) {
      if (in_subset[k]) continue;
      double obj = state.objective_if_added(k);
      if (obj < best_obj - 1e-12) {
        best_obj = obj;
        best_item = k;
      }
    }
    state.add(best_item);
    in_subset[best_item] = 1;
    selected.push_back(best_item);
  }
  return selected;
}

bool selection_less(const SelectionVector& a, const SelectionVector& b) {
  if (a.objective != b.objective) return a.objective < b.objective;
  return a.selected < b.selected;
}

}  // namespace

double objective(const std::vector<int>& selected, const BinMatrices& binned,
                 const SubsetProblem& problem) {
  require(static_cast<int>(selected.size()) == problem.subset_size,
          ErrorCode::invalid_arg,
          "selection cardinality " + std::to_string(selected.size()) +
              " does not equal N = " + std::to_string(problem.subset_size));
  std::vector<int> counts(static_cast<std::size_t>(problem.bins) * problem.dims, 0);
  for (int item : selected) {
    require(item >= 0 && item < problem.item_count, ErrorCode::invalid_arg,
            "selection index out of range");
    for (int m = 0; m < problem.dims; ++m)
      ++counts[static_cast<std::size_t>(binned.bin_of(item, m)) * problem.dims + m];
  }
  double obj = 0.0;
  for (int m = 0; m < problem.dims; ++m)
    for (int h = 0; h < problem.bins; ++h)
      obj += std::abs(counts[static_cast<std::size_t>(h) * problem.dims + m] -
                      problem.subset_size * problem.target(h, m));
  return obj;
}

SelectionVector solve_exact(const SubsetProblem& problem, std::uint64_t budget) {
  problem.validate();
  const int k = problem.item_count, n = problem.subset_size;

  // C(K,N) with overflow-safe early exit against the budget.
  double combos = 1.0;
  for (int i = 0; i < n; ++i) combos = combos * (k - i) / (i + 1);
  if (combos > static_cast<double>(budget))
    fail(ErrorCode::budget_exceeded,
         "C(" + std::to_string(k) + "," + std::to_string(n) +
             ") exceeds the enumeration budget; use local search");

  BinMatrices binned = quantize(problem);

  // Lexicographic subset enumeration; strict improvement keeps the first
  // (lexicographically smallest) optimum.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  SelectionVector best;
  best.objective = std::numeric_limits<double>::infinity();
  while (true) {
    double obj = objective(idx, binned, problem);
    if (obj < best.objective - 1e-12) {
      best.objective = obj;
      best.selected = idx;
    }
    int i = n - 1;
    while (i >= 0 && idx[i] == k - n + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

SelectionVector solve_greedy(const SubsetProblem& problem) {
  problem.validate();
  BinMatrices binned = quantize(problem);
  std::vector<int> selected = greedy_construct(problem, binned);
  double obj = objective(selected, binned, problem);
  return finish(std::move(selected), obj);
}

SelectionVector solve_local_search(const SubsetProblem& problem, std::uint64_t seed,
                                   int restarts) {
  problem.validate();
  require(restarts >= 1, ErrorCode::invalid_arg, "restarts must be >= 1");
  BinMatrices binned = quantize(problem);

  SelectionVector best = local_descent(problem, binned, greedy_construct(problem, binned));
  for (int r = 1; r < restarts; ++r) {
    CounterRng rng(CounterRng::derive(seed, static_cast<std::uint64_t>(r)));
    // Seeded random N-subset via partial Fisher-Yates.
    std::vector<int> pool(problem.item_count);
    for (int i = 0; i < problem.item_count; ++i) pool[i] = i;
    for (int i = 0; i < problem.subset_size; ++i) {
      int j = i + static_cast<int>(rng.next_below(problem.item_count - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> start(pool.begin(), pool.begin() + problem.subset_size);
    SelectionVector candidate = local_descent(problem, binned, std::move(start));
    if (selection_less(candidate, best)) best = candidate;
  }
  return best;
}

}  // namespace uvqa
