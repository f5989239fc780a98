#include "crfmot/assignment.hpp"

#include <cmath>

namespace crfmot {

namespace {

constexpr double kBig = 1e9;  // blocks dummy/dummy mismatches in the padding

// Classic potentials + shortest-augmenting-path assignment on a square
// matrix; returns col -> row (1-based internally).
std::vector<int> solve_square(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  return p;
}

}  // namespace

Assignment hungarian(const std::vector<std::vector<double>>& cost, double no_assign_cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n > 0 ? static_cast<int>(cost[0].size()) : 0;
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != m) throw ContractViolation("ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c) || std::abs(c) >= 1e8) {
        throw ContractViolation("assignment costs must be finite and |c| < 1e8");
      }
    }
  }
  Assignment out;
  out.row_to_col.assign(n, -1);
  if (n == 0) return out;

  const double dummy = std::isfinite(no_assign_cost) ? std::min(no_assign_cost, kBig) : kBig;
  // Square padding: each row gets a personal dummy column at the
  // no-assignment cost, each column a free dummy row, dummies pair at zero.
  const int size = n + m;
  std::vector<std::vector<double>> a(size, std::vector<double>(size, kBig));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) a[i][j] = cost[i][j];
    a[i][m + i] = dummy;
  }
  for (int k = 0; k < m; ++k) a[n + k][k] = 0.0;
  for (int r = n; r < size; ++r) {
    for (int c = m; c < size; ++c) a[r][c] = 0.0;
  }

  const std::vector<int> p = solve_square(a);
  for (int j = 1; j <= size; ++j) {
    const int i = p[j] - 1;
    const int col = j - 1;
    if (i >= 0 && i < n && col < m && cost[i][col] < kBig / 2.0) {
      out.row_to_col[i] = col;
      out.cost += cost[i][col];
    }
  }
  return out;
}

}  // namespace crfmot
