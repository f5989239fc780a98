#include <doctest.h>

#include <random>

#include "crfmot/pipeline.hpp"

using namespace crfmot;

namespace {

std::vector<TrainingWindow> sample_windows(std::uint64_t seed, int scenes,
                                           const TrainableModel& model, int window_size = 60) {
  RunConfig cfg;
  cfg.scene.n_targets = 6;
  cfg.scene.n_frames = 120;
  cfg.scene.miss_rate = 0.1;
  cfg.scene.crossings = 2;
  cfg.scene.app_noise = 0.3;
  cfg.params = model.params;
  cfg.params.window_size = window_size;
  TrainableModel m = model;
  m.params.window_size = window_size;
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < scenes; ++s) seeds.push_back(seed + s);
  return windows_from_scenes(cfg, seeds, m);
}

TrainableModel perturbed_model(std::uint64_t seed) {
  TrainableModel m = TrainableModel::defaults(16);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);
  auto theta = m.parameter_vector();
  for (double& v : theta) v += jitter(rng);
  theta[0] = std::max(theta[0], 0.1);  // w_u
  theta[1] = std::max(theta[1], 0.1);  // w_d
  theta[2] = std::max(theta[2], 0.1);  // gamma
  m.set_parameter_vector(theta);
  return m;
}

}  // namespace

TEST_CASE("cross entropy values") {
  RelaxedLabeling q;
  q.q = {{0.0, 1.0}, {1.0, 0.0}};
  CHECK(cross_entropy(q, {1, 0}) == 0.0);
  q.q = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK(cross_entropy(q, {0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Hand instance: -(ln 0.8 + ln 0.3) / 2.
  q.q = {{0.2, 0.8}, {0.3, 0.7}};
  CHECK(cross_entropy(q, {1, 0}) ==
        doctest::Approx(-(std::log(0.8) + std::log(0.3)) / 2.0).epsilon(1e-12));
  CHECK_FALSE(cross_entropy_clamped(q, {1, 0}));
  q.q = {{1.0, 0.0}, {0.3, 0.7}};
  CHECK(cross_entropy_clamped(q, {1, 0}));
}

TEST_CASE("parameter vector round trip") {
  TrainableModel m = TrainableModel::defaults(16);
  const auto theta = m.parameter_vector();
  CHECK(static_cast<int>(theta.size()) == m.parameter_count());
  CHECK(theta[0] == 1.0);  // w_u
  CHECK(theta[1] == 1.0);  // w_d
  CHECK(theta[2] == 0.5);  // gamma
  TrainableModel copy = TrainableModel::defaults(16);
  auto changed = theta;
  changed[4] = -7.5;
  copy.set_parameter_vector(changed);
  CHECK(copy.parameter_vector() == changed);
}

TEST_CASE("analytic parameter gradient matches finite differences") {
  const TrainableModel base = TrainableModel::defaults(16);
  auto windows = sample_windows(1234, 2, base, 40);
  REQUIRE(!windows.empty());

  double worst = 0.0;
  int checked = 0;
  std::mt19937_64 rng(5150);
  for (size_t w = 0; w < windows.size() && checked < 6; ++w) {
    if (windows[w].graph.num_nodes() < 3) continue;
    // Check both at the defaults and at random parameter points.
    for (const TrainableModel& m : {base, perturbed_model(rng())}) {
      const auto analytic = param_gradient(windows[w], m);
      const auto fd = param_gradient_fd(windows[w], m, 1e-4);
      REQUIRE(analytic.size() == fd.size());
      for (size_t k = 0; k < analytic.size(); ++k) {
        const double rel = std::abs(analytic[k] - fd[k]) /
                           std::max({1.0, std::abs(analytic[k]), std::abs(fd[k])});
        worst = std::max(worst, rel);
      }
      ++checked;
    }
  }
  CHECK(checked >= 4);
  CHECK(worst < 1e-3);
}

TEST_CASE("gamma gradient vanishes with zero iterations") {
  TrainableModel m = TrainableModel::defaults(16);
  m.params.iterations = 0;
  auto windows = sample_windows(99, 1, m, 40);
  REQUIRE(!windows.empty());
  const auto grad = param_gradient(windows[0], m);
  CHECK(grad[2] == 0.0);
  // w_d is also unused when no gradient step consumes the tables.
  CHECK(grad[1] == 0.0);
}

TEST_CASE("training with zero learning rate changes nothing") {
  const TrainableModel init = TrainableModel::defaults(16);
  auto windows = sample_windows(7, 2, init, 50);
  REQUIRE(windows.size() >= 2);
  std::vector<TrainingWindow> val{windows.back()};
  windows.pop_back();

  TrainSchedule schedule;
  schedule.learning_rate = 0.0;
  schedule.epochs = 3;
  const TrainResult r = train(windows, val, init, schedule);
  CHECK(r.model.parameter_vector() == init.parameter_vector());
  for (const TrainLogEntry& e : r.log) {
    CHECK(e.train_loss == r.log.front().train_loss);
    CHECK(e.val_loss == r.log.front().val_loss);
  }
}

TEST_CASE("zero epochs return the initial model bit-identically") {
  const TrainableModel init = perturbed_model(4242);
  auto windows = sample_windows(8, 1, init, 50);
  TrainSchedule schedule;
  schedule.epochs = 0;
  const TrainResult r = train(windows, {}, init, schedule);
  CHECK(r.model.parameter_vector() == init.parameter_vector());
  CHECK(r.log.size() == 1);
}

TEST_CASE("training is deterministic given a seed") {
  const TrainableModel init = TrainableModel::defaults(16);
  auto windows = sample_windows(11, 2, init, 50);
  REQUIRE(windows.size() >= 2);
  std::vector<TrainingWindow> val{windows.back()};
  windows.pop_back();
  TrainSchedule schedule;
  schedule.epochs = 4;
  schedule.seed = 31;
  const TrainResult a = train(windows, val, init, schedule);
  const TrainResult b = train(windows, val, init, schedule);
  CHECK(a.model.parameter_vector() == b.model.parameter_vector());
  REQUIRE(a.log.size() == b.log.size());
  for (size_t k = 0; k < a.log.size(); ++k) {
    CHECK(a.log[k].train_loss == b.log[k].train_loss);
    CHECK(a.log[k].val_loss == b.log[k].val_loss);
  }
}

TEST_CASE("planted labels are learnable") {
  const TrainableModel planted = perturbed_model(606);
  const TrainableModel init = TrainableModel::defaults(16);
  auto windows = sample_windows(21, 3, init, 50);
  REQUIRE(windows.size() >= 3);
  plant_labels(windows, planted);
  // Planted labels satisfy the matching rule by construction.
  for (const TrainingWindow& w : windows) {
    CHECK(labels_satisfy_matching(w.graph.nodes, w.gt_labels));
  }
  std::vector<TrainingWindow> val{windows.back()};
  windows.pop_back();

  TrainSchedule schedule;
  schedule.epochs = 30;
  schedule.patience = 30;
  const double before = [&] {
    double acc = 0.0;
    for (const auto& w : val) acc += window_loss(w, init);
    return acc / val.size();
  }();
  const TrainResult r = train(windows, val, init, schedule);
  double after = 0.0;
  for (const auto& w : val) after += window_loss(w, r.model);
  after /= val.size();
  CHECK(after < before);
}

TEST_CASE("identity labels form a matching") {
  SceneConfig cfg;
  cfg.n_targets = 6;
  cfg.n_frames = 100;
  cfg.miss_rate = 0.15;
  cfg.seed = 9;
  const Scene scene = generate_scene(cfg);
  const auto tracklets = link_detections(group_by_frame(scene.detections));
  const auto identity = tracklet_identities(tracklets);
  CrfGraph g;
  const TrainableModel m = TrainableModel::defaults(16);
  g.nodes = build_nodes(tracklets, 20, m.unary);
  const auto labels = identity_gt_labels(g.nodes, tracklets, identity);
  CHECK(labels_satisfy_matching(g.nodes, labels));
  // At least one positive given fragmentation by misses.
  CHECK(std::count(labels.begin(), labels.end(), 1) > 0);
}
