#pragma once

#include <cstdint>

#include "crfmot/graph.hpp"
#include "crfmot/inference.hpp"

namespace crfmot {

// One training sample: graph topology with cached features so probabilities
// and potentials can be re-derived from any provider state, plus per-node
// ground-truth labels (which satisfy the matching rule).
struct TrainingWindow {
  CrfGraph graph;
  std::vector<UnaryFeature> node_features;
  std::vector<NodePairFeature> edge_features;
  std::vector<int> gt_labels;
};

// The full trainable surface: the CRF coefficients and both logistic
// providers, flattened as [w_u, w_d, gamma, unary weights, pairwise weights].
struct TrainableModel {
  CrfParams params;
  LogisticUnaryProvider unary;
  LogisticPairwiseProvider pairwise;

  static TrainableModel defaults(int d_a = 16);

  std::vector<double> parameter_vector() const;
  void set_parameter_vector(std::span<const double> v);
  int parameter_count() const;
  ProviderSet providers() const;
};

// Recomputes node/edge probabilities and potential tables in place from the
// cached features.
void refresh_window(TrainingWindow& w, const TrainableModel& m);

// Mean cross-entropy -(1/|V|) sum_i ln q_{i:gt_i}, q clamped to [1e-9, 1].
double cross_entropy(const RelaxedLabeling& q, const std::vector<int>& gt);

// True if any q_{i:gt_i} hit the loss clamp (training health check).
bool cross_entropy_clamped(const RelaxedLabeling& q, const std::vector<int>& gt);

// Refresh + unrolled inference + cross-entropy. Optionally returns q^T.
double window_loss(const TrainingWindow& w, const TrainableModel& m,
                   RelaxedLabeling* q_out = nullptr);

// Gradient of window_loss w.r.t. the parameter vector by reverse
// accumulation through the T unrolled iterations. Requires the softmax
// projection (the default); use param_gradient_fd otherwise.
std::vector<double> param_gradient(const TrainingWindow& w, const TrainableModel& m);

// Central finite differences with per-parameter relative step h*max(1,|p|).
std::vector<double> param_gradient_fd(const TrainingWindow& w, const TrainableModel& m,
                                      double h = 1e-4);

struct TrainSchedule {
  double learning_rate = 0.001;
  int epochs = 50;
  int batch = 8;
  int patience = 10;
  std::uint64_t seed = 1;
};

struct TrainLogEntry {
  int epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  TrainableModel model;  // best validation loss seen
  std::vector<TrainLogEntry> log;
};

// Adam (0.9/0.999, 1e-8) over mini-batches of windows with early stopping on
// validation loss. Deterministic given the schedule seed. Throws
// NumericFailure when the loss stops being finite.
TrainResult train(const std::vector<TrainingWindow>& train_windows,
                  const std::vector<TrainingWindow>& val_windows, const TrainableModel& init,
                  const TrainSchedule& schedule);

// Majority detection identity per tracklet (kNoIdentity when absent).
std::vector<int> tracklet_identities(const std::vector<Tracklet>& tracklets);

// gt label 1 iff both tracklets carry the same identity and the second is
// that identity's immediate next fragment; satisfies the matching rule.
std::vector<int> identity_gt_labels(const std::vector<CrfNode>& nodes,
                                    const std::vector<Tracklet>& tracklets,
                                    const std::vector<int>& identity);

// Sliding-window training samples over the tracklet set, labels derived from
// detection identities.
std::vector<TrainingWindow> make_training_windows(const std::vector<Tracklet>& tracklets,
                                                  int t_thr, const TrainableModel& m,
                                                  const DifficultPairConfig& cfg, int d_a);

// Replaces every window's labels with the decoded output of the planted
// model, yielding a dataset that is realizable by construction.
void plant_labels(std::vector<TrainingWindow>& windows, const TrainableModel& planted);

}  // namespace crfmot
