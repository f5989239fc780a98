#pragma once

#include <cstdint>

#include "crfmot/core.hpp"
#include "crfmot/potentials.hpp"

namespace crfmot {

struct InferenceTrace {
  std::vector<double> energies;  // relaxed energy before step 1 and after each step
  RelaxedLabeling final_q;
};

// Unary potential of one node label from its stored probability (clamped
// before the log) and the current parameters.
inline double node_potential(const CrfNode& n, int label, const CrfParams& p) {
  return unary_potential(clamp_prob(n.unary_prob[label]), p.w_u, p.epsilon);
}

// Gibbs energy of an integral labeling; each undirected edge counted once.
double energy_integer(const CrfGraph& g, const std::vector<int>& x, const CrfParams& p);

// Energy of the quadratic-program relaxation at q.
double energy_relaxed(const CrfGraph& g, const RelaxedLabeling& q, const CrfParams& p);

// dE/dq_{i:label}: unary potential plus the per-neighbor accumulation over
// the pairwise tables.
std::vector<std::array<double, 2>> gradient(const CrfGraph& g, const RelaxedLabeling& q,
                                            const CrfParams& p);

// Per-node normalization applied after a gradient step: softmax by default,
// clip-and-renormalize behind the projection flag. The result sums to 1
// exactly.
std::array<double, 2> project_pair(std::array<double, 2> v, Projection mode);

// One gradient step followed by project_pair on every node.
RelaxedLabeling iterate(const CrfGraph& g, const RelaxedLabeling& q, double gamma,
                        const CrfParams& p);

// q0 = unary probabilities, then params.iterations steps. Records the energy
// trace (length iterations + 1).
InferenceTrace infer(const CrfGraph& g, const CrfParams& p);

// Per-node argmax (ties -> 0) plus a greedy repair pass that keeps, in
// descending q_{i:1}, only links whose tracklets are still unused on that
// side.
std::vector<int> decode(const RelaxedLabeling& q, const CrfGraph& g);

struct BruteForceResult {
  std::vector<int> labels;
  double energy = 0.0;
};

// Exhaustive minimizer over all 2^|V| labelings, |V| <= 25. Ties resolve to
// the lexicographically smallest labeling. `visited` (optional) receives the
// number of enumerated candidates.
BruteForceResult brute_force_minimize(const CrfGraph& g, const CrfParams& p,
                                      std::uint64_t* visited = nullptr);

}  // namespace crfmot
