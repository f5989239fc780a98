#pragma once

#include <limits>
#include <vector>

#include "crfmot/core.hpp"

namespace crfmot {

struct Assignment {
  std::vector<int> row_to_col;  // -1 = unassigned
  double cost = 0.0;            // sum over assigned pairs only
};

// Minimum-cost bipartite assignment (shortest augmenting path, O(n^3)).
// Each row is either matched to a distinct column or left unassigned at
// no_assign_cost; unmatched columns are free. With the default infinite
// no-assignment cost the solver returns a maximum matching of minimum cost.
// Costs must be finite and below 1e8 in magnitude.
Assignment hungarian(const std::vector<std::vector<double>>& cost,
                     double no_assign_cost = std::numeric_limits<double>::infinity());

}  // namespace crfmot
