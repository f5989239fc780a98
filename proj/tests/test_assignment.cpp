#include <doctest.h>

#include <random>

#include "crfmot/assignment.hpp"

using namespace crfmot;

namespace {

// Exhaustive oracle over all partial assignments: every row takes a free
// column or pays the no-assignment cost.
double best_partial_cost(const std::vector<std::vector<double>>& cost, double c0, size_t row,
                         std::vector<char>& used) {
  if (row == cost.size()) return 0.0;
  double best = c0 + best_partial_cost(cost, c0, row + 1, used);
  for (size_t c = 0; c < cost[row].size(); ++c) {
    if (used[c]) continue;
    used[c] = 1;
    best = std::min(best, cost[row][c] + best_partial_cost(cost, c0, row + 1, used));
    used[c] = 0;
  }
  return best;
}

double assignment_total(const std::vector<std::vector<double>>& cost, const Assignment& a,
                        double c0) {
  double total = 0.0;
  for (size_t r = 0; r < cost.size(); ++r) {
    total += a.row_to_col[r] >= 0 ? cost[r][a.row_to_col[r]] : c0;
  }
  return total;
}

}  // namespace

TEST_CASE("diagonal costs pick the diagonal") {
  std::vector<std::vector<double>> cost{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  const Assignment a = hungarian(cost);
  CHECK(a.row_to_col == std::vector<int>{0, 1, 2});
  CHECK(a.cost == 0.0);
}

TEST_CASE("three by three optimum verified against all permutations") {
  std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const Assignment a = hungarian(cost);
  CHECK(a.cost == 5.0);
  CHECK(a.row_to_col == std::vector<int>{1, 0, 2});

  // Permutation oracle.
  std::vector<int> perm{0, 1, 2};
  double best = 1e18;
  do {
    double total = 0.0;
    for (int r = 0; r < 3; ++r) total += cost[r][perm[r]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best == a.cost);
}

TEST_CASE("no-assignment threshold on a single cell") {
  const double c0 = 0.7;
  CHECK(hungarian({{0.5}}, c0).row_to_col == std::vector<int>{0});
  CHECK(hungarian({{0.9}}, c0).row_to_col == std::vector<int>{-1});
}

TEST_CASE("matches the exhaustive partial-assignment oracle") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> unit(-2.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    const int m = 1 + static_cast<int>(rng() % 5);
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (auto& row : cost) {
      for (double& c : row) c = unit(rng);
    }
    const double c0 = trial % 3 == 0 ? 1e6 : unit(rng) + 2.0;
    const Assignment a = hungarian(cost, c0);
    std::vector<char> used(m, 0);
    const double oracle = best_partial_cost(cost, c0, 0, used);
    CHECK(assignment_total(cost, a, c0) == doctest::Approx(oracle).epsilon(1e-9));
    // Columns used at most once.
    std::vector<int> col_use(m, 0);
    for (int r = 0; r < n; ++r) {
      if (a.row_to_col[r] >= 0) {
        CHECK(++col_use[a.row_to_col[r]] == 1);
      }
    }
  }
}

TEST_CASE("rectangular shapes") {
  // More rows than columns: only one row can match.
  const Assignment a = hungarian({{1.0}, {2.0}}, 10.0);
  CHECK(a.row_to_col[0] == 0);
  CHECK(a.row_to_col[1] == -1);
  // More columns than rows.
  const Assignment b = hungarian({{5.0, 1.0, 3.0}}, 10.0);
  CHECK(b.row_to_col == std::vector<int>{1});
  // Empty.
  CHECK(hungarian({}).row_to_col.empty());
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(hungarian({{std::numeric_limits<double>::quiet_NaN()}}), ContractViolation);
  CHECK_THROWS_AS(hungarian({{1e9}}), ContractViolation);
  CHECK_THROWS_AS(hungarian({{1.0, 2.0}, {1.0}}), ContractViolation);
}
