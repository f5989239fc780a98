#include <doctest.h>

#include <random>

#include "crfmot/pipeline.hpp"

using namespace crfmot;

namespace {

// Graph with directly chosen probabilities; eps = 0 makes the potentials
// exactly -ln z for hand-checkable numbers.
CrfGraph tiny_graph(std::vector<std::array<double, 2>> unary,
                    std::vector<std::tuple<int, int, PotentialTable>> edges) {
  CrfGraph g;
  for (size_t i = 0; i < unary.size(); ++i) {
    CrfNode n;
    n.index = static_cast<int>(i);
    n.first = 2 * static_cast<int>(i);
    n.second = 2 * static_cast<int>(i) + 1;
    n.unary_prob = unary[i];
    g.nodes.push_back(n);
  }
  for (const auto& [i, j, pot] : edges) {
    CrfEdge e;
    e.i = i;
    e.j = j;
    e.potential = pot;
    g.edges.push_back(e);
  }
  g.rebuild_adjacency();
  return g;
}

CrfParams eps0_params() {
  CrfParams p;
  p.epsilon = 0.0;  // only valid with probabilities away from 0
  return p;
}

RelaxedLabeling uniform_q(int n) {
  RelaxedLabeling q;
  q.q.assign(n, {0.5, 0.5});
  return q;
}

}  // namespace

TEST_CASE("integer energy on tiny instances") {
  CHECK(energy_integer(CrfGraph{}, {}, CrfParams{}) == 0.0);

  const CrfGraph g = tiny_graph({{std::exp(-1.0), std::exp(-2.0)}}, {});
  const CrfParams p = eps0_params();
  CHECK(energy_integer(g, {0}, p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(energy_integer(g, {1}, p) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("relaxed energy on tiny instances") {
  const CrfParams p = eps0_params();
  const CrfGraph g1 = tiny_graph({{std::exp(-1.0), std::exp(-2.0)}}, {});
  CHECK(energy_relaxed(g1, uniform_q(1), p) == doctest::Approx(1.5).epsilon(1e-12));

  // Two nodes, one edge, uniform q: mean of unaries plus a quarter of the
  // pairwise table sum.
  PotentialTable t{{{1.0, 2.0}, {3.0, 4.0}}};
  const CrfGraph g2 = tiny_graph(
      {{std::exp(-1.0), std::exp(-3.0)}, {std::exp(-2.0), std::exp(-4.0)}}, {{0, 1, t}});
  const double expected = (1.0 + 3.0) / 2.0 + (2.0 + 4.0) / 2.0 + (1 + 2 + 3 + 4) / 4.0;
  CHECK(energy_relaxed(g2, uniform_q(2), p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("relaxed energy at integral points equals integer energy bitwise") {
  std::mt19937_64 rng(2024);
  const CrfParams params;
  for (int trial = 0; trial < 200; ++trial) {
    RandomGraphSpec spec;
    spec.n = 2 + static_cast<int>(rng() % 20);
    spec.raw_tables = (trial % 2) == 0;
    const CrfGraph g = make_random_graph(spec, rng, params);
    std::vector<int> labels(g.num_nodes());
    RelaxedLabeling q;
    q.q.resize(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) {
      labels[i] = static_cast<int>(rng() % 2);
      q.q[i] = {labels[i] == 0 ? 1.0 : 0.0, labels[i] == 1 ? 1.0 : 0.0};
    }
    CHECK(energy_relaxed(g, q, params) == energy_integer(g, labels, params));
  }
}

TEST_CASE("gradient equals the unary table on edgeless graphs") {
  std::mt19937_64 rng(5);
  RandomGraphSpec spec;
  spec.n = 12;
  spec.edgeless = true;
  const CrfParams params;
  const CrfGraph g = make_random_graph(spec, rng, params);
  const auto grad = gradient(g, uniform_q(g.num_nodes()), params);
  for (int i = 0; i < g.num_nodes(); ++i) {
    CHECK(grad[i][0] == node_potential(g.nodes[i], 0, params));
    CHECK(grad[i][1] == node_potential(g.nodes[i], 1, params));
  }
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(31);
  const CrfParams params;
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  double max_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RandomGraphSpec spec;
    spec.n = 2 + static_cast<int>(rng() % 29);
    spec.edge_density = 0.3 * unit(rng);
    spec.raw_tables = true;
    const CrfGraph g = make_random_graph(spec, rng, params);
    RelaxedLabeling q;
    q.q.resize(g.num_nodes());
    for (auto& row : q.q) {
      row[0] = unit(rng);
      row[1] = 1.0 - row[0];
    }
    const auto grad = gradient(g, q, params);
    const double h = 1e-6;
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int lam = 0; lam < 2; ++lam) {
        RelaxedLabeling up = q, down = q;
        up.q[i][lam] += h;
        down.q[i][lam] -= h;
        const double fd =
            (energy_relaxed(g, up, params) - energy_relaxed(g, down, params)) / (2.0 * h);
        const double rel =
            std::abs(grad[i][lam] - fd) / std::max({1.0, std::abs(fd), std::abs(grad[i][lam])});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  CHECK(max_rel < 1e-6);
}

TEST_CASE("gradient rows permute with the nodes") {
  std::mt19937_64 rng(77);
  const CrfParams params;
  RandomGraphSpec spec;
  spec.n = 8;
  CrfGraph g = make_random_graph(spec, rng, params);
  RelaxedLabeling q;
  q.q.resize(g.num_nodes());
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  for (auto& row : q.q) {
    row[0] = unit(rng);
    row[1] = 1.0 - row[0];
  }
  const auto grad = gradient(g, q, params);

  // Reverse the node order (a permutation), remap edges and q.
  const int n = g.num_nodes();
  CrfGraph rg = g;
  RelaxedLabeling rq = q;
  for (int i = 0; i < n; ++i) {
    rg.nodes[i] = g.nodes[n - 1 - i];
    rg.nodes[i].index = i;
    rq.q[i] = q.q[n - 1 - i];
  }
  for (CrfEdge& e : rg.edges) {
    e.i = n - 1 - e.i;
    e.j = n - 1 - e.j;
    if (e.i > e.j) {
      std::swap(e.i, e.j);
      // Swapping endpoints transposes the table.
      PotentialTable t = e.potential;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) e.potential[a][b] = t[b][a];
      }
    }
  }
  rg.rebuild_adjacency();
  const auto rgrad = gradient(rg, rq, params);
  for (int i = 0; i < n; ++i) {
    CHECK(rgrad[i][0] == doctest::Approx(grad[n - 1 - i][0]).epsilon(1e-12));
    CHECK(rgrad[i][1] == doctest::Approx(grad[n - 1 - i][1]).epsilon(1e-12));
  }
}

TEST_CASE("iterate applies one step then the softmax") {
  // Zero potentials: unary probabilities at the clamp ceiling make
  // -ln(z + eps) = 0.
  const double z = 1.0 - 1e-6;
  CrfGraph g = tiny_graph({{z, z}}, {});
  CrfParams p;  // eps 1e-6: z + eps = 1

  SUBCASE("uniform point is a softmax fixed point") {
    const RelaxedLabeling out = iterate(g, uniform_q(1), 0.5, p);
    CHECK(out.q[0][0] == 0.5);
    CHECK(out.q[0][1] == 0.5);
  }
  SUBCASE("vertices move to the softmax image") {
    RelaxedLabeling q;
    q.q = {{1.0, 0.0}};
    const RelaxedLabeling out = iterate(g, q, 0.5, p);
    const double e = std::exp(1.0);
    CHECK(out.q[0][0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(out.q[0][1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
    CHECK(out.q[0][0] == doctest::Approx(0.731059).epsilon(1e-5));
    CHECK(out.q[0][1] == doctest::Approx(0.268941).epsilon(1e-5));
  }
}

TEST_CASE("one iterate step matches a hand-unrolled computation") {
  // Two nodes, one edge; all numbers recomputed here with scalar arithmetic.
  const double za = 0.7, zb = 0.4;
  PotentialTable t{{{0.2, 1.1}, {0.9, 0.3}}};
  const CrfGraph g = tiny_graph({{1 - za, za}, {1 - zb, zb}}, {{0, 1, t}});
  CrfParams p = eps0_params();
  const double gamma = 0.5;

  RelaxedLabeling q;
  q.q = {{0.6, 0.4}, {0.3, 0.7}};
  const RelaxedLabeling out = iterate(g, q, gamma, p);

  // Node 0 gradient: phi0(l) + sum_mu t[l][mu] * q1[mu].
  const double g00 = -std::log(1 - za) + t[0][0] * 0.3 + t[0][1] * 0.7;
  const double g01 = -std::log(za) + t[1][0] * 0.3 + t[1][1] * 0.7;
  const double s00 = 0.6 - gamma * g00, s01 = 0.4 - gamma * g01;
  const double m0 = std::max(s00, s01);
  const double e00 = std::exp(s00 - m0), e01 = std::exp(s01 - m0);
  CHECK(out.q[0][0] == doctest::Approx(e00 / (e00 + e01)).epsilon(1e-12));
  CHECK(out.q[0][1] == doctest::Approx(e01 / (e00 + e01)).epsilon(1e-12));

  // Node 1 sees the transposed table.
  const double g10 = -std::log(1 - zb) + t[0][0] * 0.6 + t[1][0] * 0.4;
  const double g11 = -std::log(zb) + t[0][1] * 0.6 + t[1][1] * 0.4;
  const double s10 = 0.3 - gamma * g10, s11 = 0.7 - gamma * g11;
  const double m1 = std::max(s10, s11);
  const double e10 = std::exp(s10 - m1), e11 = std::exp(s11 - m1);
  CHECK(out.q[1][0] == doctest::Approx(e10 / (e10 + e11)).epsilon(1e-12));
  CHECK(out.q[1][1] == doctest::Approx(e11 / (e10 + e11)).epsilon(1e-12));
}

TEST_CASE("infer starts from the unary output and records the trace") {
  std::mt19937_64 rng(15);
  RandomGraphSpec spec;
  spec.n = 10;
  CrfParams p;
  const CrfGraph g = make_random_graph(spec, rng, p);

  SUBCASE("zero iterations return q0") {
    CrfParams p0 = p;
    p0.iterations = 0;
    const InferenceTrace trace = infer(g, p0);
    CHECK(trace.energies.size() == 1);
    for (int i = 0; i < g.num_nodes(); ++i) {
      CHECK(trace.final_q.q[i][0] == g.nodes[i].unary_prob[0]);
      CHECK(trace.final_q.q[i][1] == g.nodes[i].unary_prob[1]);
    }
  }
  SUBCASE("trace length is iterations + 1 and deterministic") {
    const InferenceTrace a = infer(g, p);
    const InferenceTrace b = infer(g, p);
    CHECK(a.energies.size() == static_cast<size_t>(p.iterations) + 1);
    CHECK(a.energies == b.energies);
    for (int i = 0; i < g.num_nodes(); ++i) {
      CHECK(a.final_q.q[i][0] == b.final_q.q[i][0]);
      CHECK(a.final_q.q[i][1] == b.final_q.q[i][1]);
    }
  }
}

TEST_CASE("edgeless inference drifts toward the cheaper label") {
  CrfParams p;
  p.iterations = 200;
  p.gamma = 0.05;
  const CrfGraph g = tiny_graph({{0.3, 0.7}, {0.8, 0.2}}, {});
  const InferenceTrace trace = infer(g, p);
  CHECK(trace.final_q.q[0][1] > 0.5);  // z1 larger -> potential smaller -> label 1
  CHECK(trace.final_q.q[1][0] > 0.5);
}

TEST_CASE("simplex is preserved through iterations") {
  std::mt19937_64 rng(999);
  CrfParams p;
  RandomGraphSpec spec;
  spec.n = 40;
  for (int trial = 0; trial < 5; ++trial) {
    const CrfGraph g = make_random_graph(spec, rng, p);
    RelaxedLabeling q;
    q.q.resize(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) q.q[i] = g.nodes[i].unary_prob;
    for (int t = 0; t < 8; ++t) {
      q = iterate(g, q, p.gamma, p);
      for (const auto& row : q.q) {
        CHECK(std::abs(row[0] + row[1] - 1.0) <= 1e-12);
        CHECK(row[0] > 0.0);
        CHECK(row[0] < 1.0);
      }
    }
  }
}

TEST_CASE("clip-renorm projection stays on the simplex") {
  CrfParams p;
  p.projection = Projection::kClipRenorm;
  CHECK(project_pair({-0.5, 0.7}, p.projection)[0] == 0.0);
  CHECK(project_pair({-0.5, 0.7}, p.projection)[1] == 1.0);
  CHECK(project_pair({0.3, 0.3}, p.projection)[0] == 0.5);
  CHECK(project_pair({-1.0, -2.0}, p.projection)[0] == 0.5);
  std::mt19937_64 rng(4);
  RandomGraphSpec spec;
  spec.n = 10;
  const CrfGraph g = make_random_graph(spec, rng, p);
  const InferenceTrace trace = infer(g, p);
  for (const auto& row : trace.final_q.q) {
    CHECK(std::abs(row[0] + row[1] - 1.0) <= 1e-12);
  }
}

TEST_CASE("decode with the greedy repair pass") {
  SUBCASE("single node argmax") {
    CrfGraph g = tiny_graph({{0.5, 0.5}}, {});
    RelaxedLabeling q;
    q.q = {{0.3, 0.7}};
    CHECK(decode(q, g) == std::vector<int>{1});
  }
  SUBCASE("exact tie decodes to zero") {
    CrfGraph g = tiny_graph({{0.5, 0.5}}, {});
    CHECK(decode(uniform_q(1), g) == std::vector<int>{0});
  }
  SUBCASE("shared first tracklet keeps the higher confidence") {
    CrfGraph g = tiny_graph({{0.5, 0.5}, {0.5, 0.5}}, {});
    g.nodes[0].first = 7;
    g.nodes[1].first = 7;  // conflict on the predecessor side
    RelaxedLabeling q;
    q.q = {{0.1, 0.9}, {0.2, 0.8}};
    CHECK(decode(q, g) == std::vector<int>{1, 0});
  }
}

TEST_CASE("brute force minimizer") {
  const CrfParams p = eps0_params();
  SUBCASE("single node") {
    const CrfGraph g = tiny_graph({{std::exp(-1.0), std::exp(-2.0)}}, {});
    std::uint64_t visited = 0;
    const BruteForceResult r = brute_force_minimize(g, p, &visited);
    CHECK(r.labels == std::vector<int>{0});
    CHECK(r.energy == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(visited == 2);
  }
  SUBCASE("repellency forces the cheaper unary off") {
    // Both unaries prefer 1 (phi(1) < phi(0)); phi(1,1) is huge. The four
    // cases by hand: (0,0): 3.0, (1,0): 2.5, (0,1): 2.6, (1,1): 101.
    PotentialTable t{{{1.0, 1.0}, {1.0, 100.0}}};
    const CrfGraph g = tiny_graph(
        {{std::exp(-1.0), std::exp(-0.5)}, {std::exp(-1.0), std::exp(-0.6)}}, {{0, 1, t}});
    const BruteForceResult r = brute_force_minimize(g, p);
    CHECK(r.labels == std::vector<int>{1, 0});
    CHECK(r.energy == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("counter sees every labeling") {
    std::mt19937_64 rng(3);
    RandomGraphSpec spec;
    spec.n = 10;
    const CrfGraph g = make_random_graph(spec, rng, CrfParams{});
    std::uint64_t visited = 0;
    brute_force_minimize(g, CrfParams{}, &visited);
    CHECK(visited == (std::uint64_t{1} << 10));
  }
  SUBCASE("size cap") {
    CrfGraph g;
    g.nodes.resize(26);
    for (int i = 0; i < 26; ++i) g.nodes[i].index = i;
    g.rebuild_adjacency();
    CHECK_THROWS_AS(brute_force_minimize(g, CrfParams{}), SizeLimitError);
  }
  SUBCASE("ties break to the lexicographically smallest labeling") {
    // Symmetric instance: both labels cost the same everywhere.
    const CrfGraph g = tiny_graph({{0.5, 0.5}, {0.5, 0.5}}, {});
    const BruteForceResult r = brute_force_minimize(g, CrfParams{});
    CHECK(r.labels == std::vector<int>{0, 0});
  }
}

TEST_CASE("decoded energy never beats the exact optimum") {
  std::mt19937_64 rng(123);
  const CrfParams p;
  for (int trial = 0; trial < 50; ++trial) {
    RandomGraphSpec spec;
    spec.n = 2 + static_cast<int>(rng() % 11);
    const CrfGraph g = make_random_graph(spec, rng, p);
    const InferenceTrace trace = infer(g, p);
    const double decoded = energy_integer(g, decode(trace.final_q, g), p);
    const BruteForceResult oracle = brute_force_minimize(g, p);
    CHECK(decoded >= oracle.energy - 1e-9);
  }
}
