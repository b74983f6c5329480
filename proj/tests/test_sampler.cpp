// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "uvqa/rng.hpp"
#include "uvqa/sampler.hpp"

using namespace uvqa;

namespace {

SubsetProblem problem_1d(std::vector<double> values, int bins, int n) {
  const int items = static_cast<int>(values.size());
  return SubsetProblem::uniform_target(items, 1, bins, n, std::move(values));
}

SubsetProblem random_problem(int items, int dims, int bins, int n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> features;
  for (int i = 0; i < items * dims; ++i) features.push_back(rng.next_unit());
  return SubsetProblem::uniform_target(items, dims, bins, n, std::move(features));
}

// Independent exhaustive optimum: recursive subset enumeration plus a from-
// scratch objective (no CountState, no shared binning call sites).
double oracle_best_objective(const SubsetProblem& p) {
  // independent equal-width binning
  std::vector<int> bins(static_cast<std::size_t>(p.item_count) * p.dims);
  for (int m = 0; m < p.dims; ++m) {
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k < p.item_count; ++k) {
      lo = std::min(lo, p.feature(k, m));
      hi = std::max(hi, p.feature(k, m));
    }
    for (int k = 0; k < p.item_count; ++k) {
      int b = 0;
      if (hi > lo) {
        b = static_cast<int>((p.feature(k, m) - lo) / (hi - lo) * p.bins);
        if (b >= p.bins) b = p.bins - 1;
        if (b < 0) b = 0;
      }
      bins[static_cast<std::size_t>(k) * p.dims + m] = b;
    }
  }
  double best = 1e300;
  std::vector<int> chosen;
  auto evaluate = [&]() {
    double obj = 0.0;
    for (int m = 0; m < p.dims; ++m) {
      for (int h = 0; h < p.bins; ++h) {
        int count = 0;
        for (int k : chosen)
          if (bins[static_cast<std::size_t>(k) * p.dims + m] == h) ++count;
        obj += std::abs(count - p.subset_size * p.target(h, m));
      }
    }
    return obj;
  };
  auto recurse = [&](auto&& self, int next) -> void {
    if (static_cast<int>(chosen.size()) == p.subset_size) {
      best = std::min(best, evaluate());
      return;
    }
    if (next >= p.item_count) return;
    chosen.push_back(next);
    self(self, next + 1);
    chosen.pop_back();
    self(self, next + 1);
  };
  recurse(recurse, 0);
  return best;
}

}  // namespace

TEST_CASE("quantize: boundary clamp and degenerate dimensions") {
  BinMatrices b = quantize(problem_1d({0.0, 0.5, 1.0}, 2, 1));
  CHECK(b.bin_of(0, 0) == 0);
  CHECK(b.bin_of(1, 0) == 1);
  CHECK(b.bin_of(2, 0) == 1);

  BinMatrices flat = quantize(problem_1d({3.0, 3.0, 3.0, 3.0}, 4, 1));
  for (int k = 0; k < 4; ++k) CHECK(flat.bin_of(k, 0) == 0);

  // 6 values, 3 bins, hand-binned: range [0,6), bins [0,2),[2,4),[4,6]
  BinMatrices six = quantize(problem_1d({0.0, 1.9, 2.0, 3.5, 4.1, 6.0}, 3, 2));
  CHECK(six.bin_of(0, 0) == 0);
  CHECK(six.bin_of(1, 0) == 0);
  CHECK(six.bin_of(2, 0) == 1);
  CHECK(six.bin_of(3, 0) == 1);
  CHECK(six.bin_of(4, 0) == 2);
  CHECK(six.bin_of(5, 0) == 2);
}

TEST_CASE("objective: exact L1 values") {
  // 4 items in distinct bins; selecting one per bin hits the target exactly
  SubsetProblem p = problem_1d({0.1, 0.35, 0.6, 0.85}, 4, 4);
  BinMatrices b = quantize(p);
  CHECK(objective({0, 1, 2, 3}, b, p) == doctest::Approx(0.0));

  // M=1, H=2: all N in one bin vs (N/2, N/2) target -> objective N
  SubsetProblem lop = problem_1d({0.1, 0.12, 0.14, 0.9}, 2, 2);
  BinMatrices lb = quantize(lop);
  CHECK(objective({0, 1}, lb, lop) == doctest::Approx(2.0));

  CHECK_THROWS_AS(objective({0}, lb, lop), Error);  // cardinality violation
}

TEST_CASE("objective: random instances match an independent recomputation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SubsetProblem p = random_problem(10, 2, 3, 4, seed);
    BinMatrices b = quantize(p);
    std::vector<int> selection = {0, 2, 5, 9};
    // direct recomputation
    double expected = 0.0;
    for (int m = 0; m < p.dims; ++m) {
      for (int h = 0; h < p.bins; ++h) {
        int count = 0;
        for (int k : selection)
          if (b.bin_of(k, m) == h) ++count;
        expected += std::abs(count - p.subset_size * p.target(h, m));
      }
    }
    CHECK(objective(selection, b, p) == doctest::Approx(expected));
  }
}

TEST_CASE("solve_exact: symmetric 1-D instance balances the bins") {
  SubsetProblem p = problem_1d({0.1, 0.2, 0.3, 0.6, 0.7, 0.8}, 2, 2);
  SelectionVector sel = solve_exact(p);
  CHECK(sel.objective == doctest::Approx(0.0));
  BinMatrices b = quantize(p);
  CHECK(b.bin_of(sel.selected[0], 0) != b.bin_of(sel.selected[1], 0));
  // lexicographically smallest zero-objective subset is {0, 3}
  CHECK(sel.selected == std::vector<int>{0, 3});
}

TEST_CASE("solve_exact: N=K selects everything") {
  SubsetProblem p = problem_1d({0.1, 0.4, 0.9}, 2, 3);
  SelectionVector sel = solve_exact(p);
  CHECK(sel.selected == std::vector<int>{0, 1, 2});
  BinMatrices b = quantize(p);
  CHECK(sel.objective == doctest::Approx(objective(sel.selected, b, p)));
}

TEST_CASE("solve_exact: budget gate") {
  SubsetProblem p = random_problem(40, 1, 2, 20, 3);
  CHECK_THROWS_AS(solve_exact(p, 1000), Error);
}

TEST_CASE("solve_exact matches full enumeration on random instances") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    for (int dims : {1, 2}) {
      SubsetProblem p = random_problem(8, dims, 2, 4, seed);
      SelectionVector sel = solve_exact(p);
      CHECK(sel.objective == doctest::Approx(oracle_best_objective(p)));
      CHECK(static_cast<int>(sel.selected.size()) == p.subset_size);
      BinMatrices b = quantize(p);
      CHECK(sel.objective == doctest::Approx(objective(sel.selected, b, p)));
    }
  }
}

TEST_CASE("local search: never beats exact, matches it on small instances") {
  int matched = 0;
  for (std::uint64_t seed = 30; seed < 45; ++seed) {
    SubsetProblem p = random_problem(8, 2, 2, 4, seed);
    SelectionVector exact = solve_exact(p);
    SelectionVector local = solve_local_search(p, seed, 4);
    SelectionVector greedy = solve_greedy(p);
    CHECK(local.objective >= exact.objective - 1e-12);
    CHECK(local.objective <= greedy.objective + 1e-12);
    if (local.objective == doctest::Approx(exact.objective)) ++matched;
  }
  CHECK(matched >= 12);  // best-improvement descent solves most K=8 instances
}

TEST_CASE("local search: greedy reaches a constructed zero-objective subset") {
  // 4 bins, exactly one item per bin has the right placement
  SubsetProblem p = problem_1d({0.05, 0.3, 0.55, 0.8, 0.06, 0.07}, 4, 4);
  SelectionVector sel = solve_local_search(p, 0, 1);
  CHECK(sel.objective == doctest::Approx(0.0));
}

TEST_CASE("local search: deterministic per seed") {
  SubsetProblem p = random_problem(30, 3, 5, 10, 99);
  SelectionVector a = solve_local_search(p, 1234, 1);
  SelectionVector b = solve_local_search(p, 1234, 1);
  CHECK(a.selected == b.selected);
  CHECK(a.objective == b.objective);
}

TEST_CASE("solver outputs always carry a recomputable objective and |x| = N") {
  for (std::uint64_t seed = 50; seed < 56; ++seed) {
    SubsetProblem p = random_problem(20, 3, 4, 7, seed);
    SelectionVector sel = solve_local_search(p, seed, 3);
    CHECK(static_cast<int>(sel.selected.size()) == p.subset_size);
    BinMatrices b = quantize(p);
    CHECK(sel.objective == doctest::Approx(objective(sel.selected, b, p)));
    for (std::size_t i = 1; i < sel.selected.size(); ++i)
      CHECK(sel.selected[i] > sel.selected[i - 1]);
  }
}

TEST_CASE("objective invariant under bin-preserving monotone feature transforms") {
  SubsetProblem p = random_problem(12, 2, 3, 5, 77);
  BinMatrices before = quantize(p);
  SelectionVector sel = solve_local_search(p, 7, 2);

  // strictly monotone transform applied per dimension; with equal-width bins
  // an affine map preserves assignments exactly
  SubsetProblem q = p;
  for (int k = 0; k < q.item_count; ++k)
    for (int m = 0; m < q.dims; ++m)
      q.features[static_cast<std::size_t>(k) * q.dims + m] =
          3.0 * q.feature(k, m) + 11.0;
  BinMatrices after = quantize(q);
  CHECK(before.assignment == after.assignment);
  CHECK(objective(sel.selected, after, q) ==
        doctest::Approx(objective(sel.selected, before, p)));
}

TEST_CASE("per-category sampling at the paper shape") {
  // 4 categories, 100 items each, N = 12/13/13/12, H = 5, M = 3
  const int per_category[] = {12, 13, 13, 12};
  int total = 0;
  for (int cat = 0; cat < 4; ++cat) {
    SubsetProblem p = random_problem(100, 3, 5, per_category[cat], 500 + cat);
    SelectionVector sel = solve_local_search(p, cat, 2);
    CHECK(static_cast<int>(sel.selected.size()) == per_category[cat]);
    total += static_cast<int>(sel.selected.size());
    BinMatrices b = quantize(p);
    CHECK(sel.objective == doctest::Approx(objective(sel.selected, b, p)));
  }
  CHECK(total == 50);
}
