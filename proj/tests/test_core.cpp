#include <doctest.h>

#include <random>

#include "crfmot/core.hpp"

using namespace crfmot;

TEST_CASE("box_to_center arithmetic") {
  const Detection d = box_to_center(1, {0, 0, 10, 20});
  CHECK(d.center.x == 5.0);
  CHECK(d.center.y == 10.0);
  CHECK(d.size.x == 10.0);
  CHECK(d.size.y == 20.0);

  const Detection neg = box_to_center(2, {-5, 0, 10, 10});
  CHECK(neg.center.x == 0.0);
  CHECK(neg.center.y == 5.0);

  CHECK_THROWS_AS(box_to_center(1, {0, 0, 0, 10}), MalformedInput);
  CHECK_THROWS_AS(box_to_center(1, {0, 0, 10, -1}), MalformedInput);
}

TEST_CASE("center/corner round trip is exact") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coord(-1e5, 1e5);
  std::uniform_real_distribution<double> extent(1e-3, 1e4);
  for (int k = 0; k < 500; ++k) {
    BoxCorner box{coord(rng), coord(rng), extent(rng), extent(rng)};
    const Detection d = box_to_center(1, box);
    const BoxCorner back = center_to_corner(d);
    // (l + w/2) - w/2 reproduces l up to one rounding of the intermediate.
    const double tol_l = std::abs(box.left + box.width / 2.0) * 1e-15;
    const double tol_t = std::abs(box.top + box.height / 2.0) * 1e-15;
    CHECK(std::abs(back.left - box.left) <= tol_l);
    CHECK(std::abs(back.top - box.top) <= tol_t);
    CHECK(back.width == box.width);
    CHECK(back.height == box.height);
  }
}

TEST_CASE("node construction enforces the strict gap rule") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 300; ++k) {
    const int t_thr = 1 + static_cast<int>(rng() % 40);
    const int gap = -5 + static_cast<int>(rng() % 60);
    if (gap > 0 && gap < t_thr) {
      CHECK_NOTHROW(make_crf_node(0, 1, 2, gap, t_thr, {0.5, 0.5}));
    } else {
      CHECK_THROWS_AS(make_crf_node(0, 1, 2, gap, t_thr, {0.5, 0.5}), ContractViolation);
    }
  }
  CHECK_THROWS_AS(make_crf_node(0, 1, 2, 5, 20, {0.7, 0.7}), ContractViolation);
  CHECK_THROWS_AS(make_crf_node(0, 1, 2, 5, 20, {-0.1, 1.1}), ContractViolation);
}

TEST_CASE("graph adjacency validation") {
  CrfGraph g;
  g.nodes.resize(3);
  for (int i = 0; i < 3; ++i) g.nodes[i].index = i;
  CrfEdge e;
  e.i = 0;
  e.j = 1;
  g.edges.push_back(e);
  g.rebuild_adjacency();
  CHECK_NOTHROW(g.validate());

  SUBCASE("tampered adjacency") {
    g.adjacency[2].push_back(0);
    CHECK_THROWS_AS(g.validate(), ContractViolation);
  }
  SUBCASE("duplicate edge") {
    CrfEdge dup;
    dup.i = 1;
    dup.j = 0;
    g.edges.push_back(dup);
    g.rebuild_adjacency();
    CHECK_THROWS_AS(g.validate(), ContractViolation);
  }
  SUBCASE("self loop") {
    CrfEdge loop;
    loop.i = 2;
    loop.j = 2;
    g.edges.push_back(loop);
    g.rebuild_adjacency();
    CHECK_THROWS_AS(g.validate(), ContractViolation);
  }
}

TEST_CASE("detection validation") {
  Detection d = box_to_center(1, {0, 0, 10, 10}, 0.5);
  CHECK_NOTHROW(validate_detection(d));
  d.appearance = {0.6, 0.8};
  CHECK_NOTHROW(validate_detection(d));
  d.appearance = {0.6, 0.9};
  CHECK_THROWS_AS(validate_detection(d), ContractViolation);
  d.appearance.clear();
  d.confidence = 1.5;
  CHECK_THROWS_AS(validate_detection(d), ContractViolation);
}

TEST_CASE("iou basics") {
  const Detection a = box_to_center(1, {0, 0, 10, 10});
  CHECK(iou(a, a) == doctest::Approx(1.0));
  const Detection b = box_to_center(1, {20, 20, 10, 10});
  CHECK(iou(a, b) == 0.0);
  const Detection c = box_to_center(1, {5, 0, 10, 10});
  CHECK(iou(a, c) == doctest::Approx(50.0 / 150.0));
}

TEST_CASE("default params match the reference setup") {
  CrfParams p;
  CHECK_NOTHROW(validate_params(p));
  CHECK(p.w_u == 1.0);
  CHECK(p.w_d == 1.0);
  CHECK(p.gamma == 0.5);
  CHECK(p.iterations == 5);
  CHECK(p.t_thr_round1 == 20);
  CHECK(p.t_thr_round2 == 50);
  CHECK(p.window_size == 200);
  CHECK(p.epsilon == 1e-6);
  p.gamma = 0.0;
  CHECK_THROWS_AS(validate_params(p), ContractViolation);
}
