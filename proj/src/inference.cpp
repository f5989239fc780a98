#include "crfmot/inference.hpp"

#include <algorithm>
#include <set>

namespace crfmot {

double energy_integer(const CrfGraph& g, const std::vector<int>& x, const CrfParams& p) {
  if (static_cast<int>(x.size()) != g.num_nodes()) {
    throw ContractViolation("labeling size does not match node count");
  }
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (x[i] != 0 && x[i] != 1) throw ContractViolation("labels must be binary");
    acc += node_potential(g.nodes[i], x[i], p);
  }
  for (const CrfEdge& e : g.edges) {
    acc += e.potential[x[e.i]][x[e.j]];
  }
  return acc;
}

double energy_relaxed(const CrfGraph& g, const RelaxedLabeling& q, const CrfParams& p) {
  if (q.size() != g.num_nodes()) {
    throw ContractViolation("labeling size does not match node count");
  }
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    // lambda = 1 - x[i] contributes 0 exactly at integral q, so the integer
    // and relaxed accumulations agree bit-for-bit at vertices.
    acc += node_potential(g.nodes[i], 0, p) * q.q[i][0];
    acc += node_potential(g.nodes[i], 1, p) * q.q[i][1];
  }
  for (const CrfEdge& e : g.edges) {
    for (int li = 0; li < 2; ++li) {
      for (int lj = 0; lj < 2; ++lj) {
        acc += e.potential[li][lj] * q.q[e.i][li] * q.q[e.j][lj];
      }
    }
  }
  return acc;
}

std::vector<std::array<double, 2>> gradient(const CrfGraph& g, const RelaxedLabeling& q,
                                            const CrfParams& p) {
  if (q.size() != g.num_nodes()) {
    throw ContractViolation("labeling size does not match node count");
  }
  std::vector<std::array<double, 2>> grad(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) {
    // Pairwise stage: accumulate the filter response per (lambda, mu) over
    // all neighbors, then reduce over mu.
    double acc[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (int eidx : g.adjacency[i]) {
      const CrfEdge& e = g.edges[eidx];
      const int j = e.i == i ? e.j : e.i;
      for (int lam = 0; lam < 2; ++lam) {
        for (int mu = 0; mu < 2; ++mu) {
          const double phi = e.i == i ? e.potential[lam][mu] : e.potential[mu][lam];
          acc[lam][mu] += phi * q.q[j][mu];
        }
      }
    }
    for (int lam = 0; lam < 2; ++lam) {
      grad[i][lam] = node_potential(g.nodes[i], lam, p) + acc[lam][0] + acc[lam][1];
    }
  }
  return grad;
}

std::array<double, 2> project_pair(std::array<double, 2> v, Projection mode) {
  if (mode == Projection::kSoftmax) {
    const double m = std::max(v[0], v[1]);
    const double e0 = std::exp(v[0] - m);
    const double e1 = std::exp(v[1] - m);
    const double q0 = e0 / (e0 + e1);
    return {q0, 1.0 - q0};
  }
  double c0 = std::clamp(v[0], 0.0, 1.0);
  double c1 = std::clamp(v[1], 0.0, 1.0);
  const double s = c0 + c1;
  if (s <= 0.0) return {0.5, 0.5};
  const double q0 = c0 / s;
  return {q0, 1.0 - q0};
}

RelaxedLabeling iterate(const CrfGraph& g, const RelaxedLabeling& q, double gamma,
                        const CrfParams& p) {
  if (!(gamma > 0.0)) throw ContractViolation("gamma must be > 0");
  const auto grad = gradient(g, q, p);
  RelaxedLabeling out;
  out.q.resize(q.size());
  for (int i = 0; i < q.size(); ++i) {
    const std::array<double, 2> stepped{q.q[i][0] - gamma * grad[i][0],
                                        q.q[i][1] - gamma * grad[i][1]};
    out.q[i] = project_pair(stepped, p.projection);
  }
  return out;
}

InferenceTrace infer(const CrfGraph& g, const CrfParams& p) {
  InferenceTrace trace;
  trace.final_q.q.resize(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) trace.final_q.q[i] = g.nodes[i].unary_prob;
  trace.energies.reserve(p.iterations + 1);
  trace.energies.push_back(energy_relaxed(g, trace.final_q, p));
  for (int t = 0; t < p.iterations; ++t) {
    trace.final_q = iterate(g, trace.final_q, p.gamma, p);
    trace.energies.push_back(energy_relaxed(g, trace.final_q, p));
  }
  for (double e : trace.energies) {
    if (!std::isfinite(e)) throw NumericFailure("non-finite energy during inference");
  }
  return trace;
}

std::vector<int> decode(const RelaxedLabeling& q, const CrfGraph& g) {
  if (q.size() != g.num_nodes()) {
    throw ContractViolation("labeling size does not match node count");
  }
  std::vector<int> labels(g.num_nodes(), 0);
  std::vector<int> on;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (q.q[i][1] > q.q[i][0]) on.push_back(i);  // exact tie stays at 0
  }
  std::sort(on.begin(), on.end(), [&](int a, int b) {
    if (q.q[a][1] != q.q[b][1]) return q.q[a][1] > q.q[b][1];
    return a < b;
  });
  std::set<int> used_first, used_second;
  for (int i : on) {
    const CrfNode& n = g.nodes[i];
    if (used_first.count(n.first) || used_second.count(n.second)) continue;
    used_first.insert(n.first);
    used_second.insert(n.second);
    labels[i] = 1;
  }
  return labels;
}

BruteForceResult brute_force_minimize(const CrfGraph& g, const CrfParams& p,
                                      std::uint64_t* visited) {
  const int n = g.num_nodes();
  if (n > 25) {
    throw SizeLimitError("brute_force_minimize capped at 25 nodes, got " + std::to_string(n));
  }
  BruteForceResult best;
  best.labels.assign(n, 0);
  std::vector<int> labels(n, 0);
  std::uint64_t count = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (int i = 0; i < n; ++i) labels[i] = static_cast<int>((mask >> i) & 1u);
    const double e = energy_integer(g, labels, p);
    ++count;
    if (mask == 0) {
      best.energy = e;
      best.labels = labels;
      continue;
    }
    if (e < best.energy || (e == best.energy && labels < best.labels)) {
      best.energy = e;
      best.labels = labels;
    }
  }
  if (visited) *visited = count;
  return best;
}

}  // namespace crfmot
