// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "uvqa/common.hpp"

namespace uvqa {

// Select subset_size items whose per-dimension bin histogram is closest (L1)
// to a target PMF. features is row-major: item k, dimension m at [k*dims + m].
struct SubsetProblem {
  int item_count = 0;     // K
  int dims = 0;           // M
  int bins = 0;           // H
  int subset_size = 0;    // N
  std::vector<double> features;    // K x M
  std::vector<double> target_pmf;  // H x M, column m sums to 1

  static SubsetProblem uniform_target(int item_count, int dims, int bins,
                                      int subset_size, std::vector<double> features);
  void validate() const;
  double feature(int item, int dim) const { return features[static_cast<std::size_t>(item) * dims + dim]; }
  double target(int bin, int dim) const { return target_pmf[static_cast<std::size_t>(bin) * dims + dim]; }
};

// Bin index of every item in every dimension; equal-width bins over the
// observed [min,max] range, degenerate dimensions collapse to bin 0.
struct BinMatrices {
  int bins = 0;
  int dims = 0;
  std::vector<int> assignment;  // K x M

  int bin_of(int item, int dim) const { return assignment[static_cast<std::size_t>(item) * dims + dim]; }
};

BinMatrices quantize(const SubsetProblem& problem);

struct SelectionVector {
  std::vector<int> selected;  // sorted item indices, |selected| = N
  double objective = 0.0;
};

// Exact L1 objective sum_m || B^m x - N D_{*m} ||_1 for the given selection.
double objective(const std::vector<int>& selected, const BinMatrices& binned,
                 const SubsetProblem& problem);

// Exhaustive enumeration; ties resolved to the lexicographically smallest
// index set. Fails with budget_exceeded when C(K,N) > budget.
SelectionVector solve_exact(const SubsetProblem& problem,
                            std::uint64_t budget = 2'000'000);

// Greedy construction plus best-improvement 1-swap descent; restart 0 starts
// from the greedy solution, further restarts from seeded random subsets.
SelectionVector solve_local_search(const SubsetProblem& problem,
                                   std::uint64_t seed = 0, int restarts = 4);

// Greedy construction only (no swap phase); used as an upper-bound reference.
SelectionVector solve_greedy(const SubsetProblem& problem);

}  // namespace uvqa
