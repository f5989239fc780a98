#include "crfmot/learning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "crfmot/association.hpp"

namespace crfmot {

namespace {

constexpr double kLossClamp = 1e-9;

struct ForwardCache {
  // per node
  std::vector<double> act;                  // unary pre-activation
  std::vector<double> s;                    // sigmoid output
  std::vector<std::array<double, 2>> phi;   // unary potentials
  // per edge
  std::vector<std::array<double, kPairwiseInputDim>> ex;  // derived inputs
  std::vector<std::array<double, 2>> eact;                // two head activations
  std::vector<std::array<double, 2>> ez;                  // head outputs
  // unrolled iterations
  CrfGraph graph;                                         // refreshed copy
  std::vector<RelaxedLabeling> qs;                        // length T+1
  std::vector<std::vector<std::array<double, 2>>> gs;     // length T
  double loss = 0.0;
};

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

std::array<double, 5> unary_inputs(const UnaryFeature& f) {
  return {f.app_cos, f.dp1_scaled, f.dp2_scaled, f.gap_frac, 1.0};
}

ForwardCache forward(const TrainingWindow& w, const TrainableModel& m) {
  ForwardCache c;
  c.graph = w.graph;
  const int n = c.graph.num_nodes();
  const int ne = c.graph.num_edges();
  if (static_cast<int>(w.node_features.size()) != n ||
      static_cast<int>(w.edge_features.size()) != ne) {
    throw ContractViolation("training window feature caches do not match the graph");
  }

  c.act.resize(n);
  c.s.resize(n);
  c.phi.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto x = unary_inputs(w.node_features[i]);
    double a = 0.0;
    for (int k = 0; k < 5; ++k) a += m.unary.w[k] * x[k];
    c.act[i] = a;
    c.s[i] = sigmoid(a);
    c.graph.nodes[i].unary_prob = {1.0 - c.s[i], c.s[i]};
    c.phi[i][0] = unary_potential(clamp_prob(1.0 - c.s[i]), m.params.w_u, m.params.epsilon);
    c.phi[i][1] = unary_potential(clamp_prob(c.s[i]), m.params.w_u, m.params.epsilon);
  }

  c.ex.resize(ne);
  c.eact.resize(ne);
  c.ez.resize(ne);
  for (int e = 0; e < ne; ++e) {
    CrfEdge& edge = c.graph.edges[e];
    c.ex[e] = pairwise_inputs(w.edge_features[e], m.pairwise.pos_scale);
    const int base = edge.kind == EdgeKind::Repellency ? 2 : 0;
    for (int h = 0; h < 2; ++h) {
      const auto& row = m.pairwise.w[base + h];
      double a = row[kPairwiseInputDim];
      for (int k = 0; k < kPairwiseInputDim; ++k) a += row[k] * c.ex[e][k];
      c.eact[e][h] = a;
      c.ez[e][h] = sigmoid(a);
    }
    edge.joint_prob = c.ez[e];
    edge.potential = pairwise_potential(clamp_prob(c.ez[e][0]), clamp_prob(c.ez[e][1]),
                                        m.params.w_d, m.params.epsilon);
  }

  const int T = m.params.iterations;
  c.qs.resize(T + 1);
  c.gs.resize(T);
  c.qs[0].q.resize(n);
  for (int i = 0; i < n; ++i) c.qs[0].q[i] = c.graph.nodes[i].unary_prob;
  for (int t = 0; t < T; ++t) {
    c.gs[t] = gradient(c.graph, c.qs[t], m.params);
    c.qs[t + 1].q.resize(n);
    for (int i = 0; i < n; ++i) {
      const std::array<double, 2> stepped{
          c.qs[t].q[i][0] - m.params.gamma * c.gs[t][i][0],
          c.qs[t].q[i][1] - m.params.gamma * c.gs[t][i][1]};
      c.qs[t + 1].q[i] = project_pair(stepped, m.params.projection);
    }
  }
  c.loss = cross_entropy(c.qs[T], w.gt_labels);
  return c;
}

}  // namespace

TrainableModel TrainableModel::defaults(int d_a) {
  TrainableModel m;
  m.unary = LogisticUnaryProvider::defaults();
  m.pairwise = LogisticPairwiseProvider::defaults(d_a);
  return m;
}

std::vector<double> TrainableModel::parameter_vector() const {
  std::vector<double> v{params.w_u, params.w_d, params.gamma};
  const auto u = unary.parameters();
  v.insert(v.end(), u.begin(), u.end());
  const auto p = pairwise.parameters();
  v.insert(v.end(), p.begin(), p.end());
  return v;
}

void TrainableModel::set_parameter_vector(std::span<const double> v) {
  if (static_cast<int>(v.size()) != parameter_count()) {
    throw ContractViolation("parameter vector size mismatch");
  }
  params.w_u = v[0];
  params.w_d = v[1];
  params.gamma = v[2];
  unary.set_parameters(v.subspan(3, 5));
  pairwise.set_parameters(v.subspan(8));
}

int TrainableModel::parameter_count() const {
  return 3 + 5 + LogisticPairwiseProvider::kRows * LogisticPairwiseProvider::kRowDim;
}

ProviderSet TrainableModel::providers() const {
  ProviderSet s;
  s.unary = std::make_shared<LogisticUnaryProvider>(unary);
  s.pairwise = std::make_shared<LogisticPairwiseProvider>(pairwise);
  return s;
}

void refresh_window(TrainingWindow& w, const TrainableModel& m) {
  const ForwardCache c = forward(w, m);
  w.graph = c.graph;
}

double cross_entropy(const RelaxedLabeling& q, const std::vector<int>& gt) {
  if (q.size() != static_cast<int>(gt.size())) {
    throw ContractViolation("label count does not match q");
  }
  if (gt.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < gt.size(); ++i) {
    const double qi = std::clamp(q.q[i][gt[i]], kLossClamp, 1.0);
    acc -= std::log(qi);
  }
  return acc / static_cast<double>(gt.size());
}

bool cross_entropy_clamped(const RelaxedLabeling& q, const std::vector<int>& gt) {
  for (size_t i = 0; i < gt.size(); ++i) {
    if (q.q[i][gt[i]] < kLossClamp) return true;
  }
  return false;
}

double window_loss(const TrainingWindow& w, const TrainableModel& m, RelaxedLabeling* q_out) {
  const ForwardCache c = forward(w, m);
  if (q_out) *q_out = c.qs.back();
  return c.loss;
}

std::vector<double> param_gradient(const TrainingWindow& w, const TrainableModel& m) {
  if (m.params.projection != Projection::kSoftmax) {
    throw NumericFailure("analytic parameter gradient requires the softmax projection");
  }
  const ForwardCache c = forward(w, m);
  const int n = c.graph.num_nodes();
  const int ne = c.graph.num_edges();
  const int T = m.params.iterations;
  const double gamma = m.params.gamma;

  std::vector<double> grad(m.parameter_count(), 0.0);
  double& dw_u = grad[0];
  double& dw_d = grad[1];
  double& dgamma = grad[2];

  // Loss backward.
  std::vector<std::array<double, 2>> dq(n, {0.0, 0.0});
  if (n > 0) {
    for (int i = 0; i < n; ++i) {
      const double qi = c.qs[T].q[i][w.gt_labels[i]];
      if (qi >= kLossClamp && qi <= 1.0) {
        dq[i][w.gt_labels[i]] = -1.0 / (qi * static_cast<double>(n));
      }
    }
  }

  std::vector<std::array<double, 2>> dphi_node(n, {0.0, 0.0});
  std::vector<PotentialTable> dphi_edge(ne, PotentialTable{});

  std::vector<std::array<double, 2>> dstep(n);
  for (int t = T - 1; t >= 0; --t) {
    const auto& q_next = c.qs[t + 1].q;
    const auto& q_cur = c.qs[t].q;
    // Softmax backward.
    for (int i = 0; i < n; ++i) {
      const double inner = dq[i][0] * q_next[i][0] + dq[i][1] * q_next[i][1];
      dstep[i][0] = q_next[i][0] * (dq[i][0] - inner);
      dstep[i][1] = q_next[i][1] * (dq[i][1] - inner);
    }
    // Step backward: stepped = q_cur - gamma * g(q_cur).
    std::vector<std::array<double, 2>> dq_prev(n, {0.0, 0.0});
    for (int i = 0; i < n; ++i) {
      for (int lam = 0; lam < 2; ++lam) {
        dq_prev[i][lam] += dstep[i][lam];
        dgamma -= dstep[i][lam] * c.gs[t][i][lam];
        dphi_node[i][lam] -= gamma * dstep[i][lam];
      }
    }
    for (int e = 0; e < ne; ++e) {
      const CrfEdge& edge = c.graph.edges[e];
      const int i = edge.i, j = edge.j;
      for (int lam = 0; lam < 2; ++lam) {
        const double dgi = -gamma * dstep[i][lam];
        for (int mu = 0; mu < 2; ++mu) {
          const double dgj = -gamma * dstep[j][mu];
          dphi_edge[e][lam][mu] += dgi * q_cur[j][mu] + dgj * q_cur[i][lam];
          dq_prev[j][mu] += dgi * edge.potential[lam][mu];
          dq_prev[i][lam] += dgj * edge.potential[lam][mu];
        }
      }
    }
    dq = std::move(dq_prev);
  }

  // q0 = (1 - s, s).
  std::vector<double> ds(n, 0.0);
  for (int i = 0; i < n; ++i) ds[i] = dq[i][1] - dq[i][0];

  // Unary potentials -> w_u and the logistic weights.
  for (int i = 0; i < n; ++i) {
    const std::array<double, 2> z{1.0 - c.s[i], c.s[i]};
    double dz[2] = {0.0, 0.0};
    for (int lam = 0; lam < 2; ++lam) {
      const double zc = clamp_prob(z[lam]);
      dw_u += -std::log(zc + m.params.epsilon) * dphi_node[i][lam];
      const double dzc = -m.params.w_u / (zc + m.params.epsilon) * dphi_node[i][lam];
      if (z[lam] > kProbClampLo && z[lam] < kProbClampHi) dz[lam] = dzc;
    }
    ds[i] += dz[1] - dz[0];
    const double da = c.s[i] * (1.0 - c.s[i]) * ds[i];
    const auto x = unary_inputs(w.node_features[i]);
    for (int k = 0; k < 5; ++k) grad[3 + k] += x[k] * da;
  }

  // Pairwise potentials -> w_d and the head weights.
  for (int e = 0; e < ne; ++e) {
    const CrfEdge& edge = c.graph.edges[e];
    const double zi = c.ez[e][0], zj = c.ez[e][1];
    const double czi = clamp_prob(zi), czj = clamp_prob(zj);
    const std::array<double, 2> zia{1.0 - czi, czi};
    const std::array<double, 2> zja{1.0 - czj, czj};
    double dczi = 0.0, dczj = 0.0;
    for (int lam = 0; lam < 2; ++lam) {
      for (int mu = 0; mu < 2; ++mu) {
        const double prod = zia[lam] * zja[mu];
        dw_d += -std::log(prod + m.params.epsilon) * dphi_edge[e][lam][mu];
        const double dprod = -m.params.w_d / (prod + m.params.epsilon) * dphi_edge[e][lam][mu];
        dczi += dprod * zja[mu] * (lam == 1 ? 1.0 : -1.0);
        dczj += dprod * zia[lam] * (mu == 1 ? 1.0 : -1.0);
      }
    }
    const double dzi = (zi > kProbClampLo && zi < kProbClampHi) ? dczi : 0.0;
    const double dzj = (zj > kProbClampLo && zj < kProbClampHi) ? dczj : 0.0;
    const double db0 = zi * (1.0 - zi) * dzi;
    const double db1 = zj * (1.0 - zj) * dzj;
    const int base = edge.kind == EdgeKind::Repellency ? 2 : 0;
    const int off0 = 8 + (base + 0) * LogisticPairwiseProvider::kRowDim;
    const int off1 = 8 + (base + 1) * LogisticPairwiseProvider::kRowDim;
    for (int k = 0; k < kPairwiseInputDim; ++k) {
      grad[off0 + k] += c.ex[e][k] * db0;
      grad[off1 + k] += c.ex[e][k] * db1;
    }
    grad[off0 + kPairwiseInputDim] += db0;
    grad[off1 + kPairwiseInputDim] += db1;
  }

  return grad;
}

std::vector<double> param_gradient_fd(const TrainingWindow& w, const TrainableModel& m,
                                      double h) {
  const std::vector<double> theta = m.parameter_vector();
  std::vector<double> grad(theta.size(), 0.0);
  TrainableModel probe = m;
  for (size_t k = 0; k < theta.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(theta[k]));
    std::vector<double> t = theta;
    t[k] = theta[k] + step;
    probe.set_parameter_vector(t);
    const double up = window_loss(w, probe);
    t[k] = theta[k] - step;
    probe.set_parameter_vector(t);
    const double down = window_loss(w, probe);
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

namespace {

struct Adam {
  std::vector<double> m1, m2;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;

  explicit Adam(size_t n) : m1(n, 0.0), m2(n, 0.0) {}

  void step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (size_t k = 0; k < theta.size(); ++k) {
      m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
      m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
      theta[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + eps);
    }
  }
};

double mean_loss(const std::vector<TrainingWindow>& windows, const TrainableModel& m) {
  if (windows.empty()) return 0.0;
  double acc = 0.0;
  for (const TrainingWindow& w : windows) acc += window_loss(w, m);
  return acc / static_cast<double>(windows.size());
}

// Keeps the CrfParams invariants during unconstrained updates.
void project_constraints(std::vector<double>& theta) {
  theta[0] = std::max(theta[0], 0.0);    // w_u
  theta[1] = std::max(theta[1], 0.0);    // w_d
  theta[2] = std::max(theta[2], 1e-6);   // gamma
}

}  // namespace

TrainResult train(const std::vector<TrainingWindow>& train_windows,
                  const std::vector<TrainingWindow>& val_windows, const TrainableModel& init,
                  const TrainSchedule& schedule) {
  if (train_windows.empty()) throw MalformedInput("training requires at least one window");

  TrainResult result;
  TrainableModel model = init;
  std::vector<double> theta = model.parameter_vector();
  Adam adam(theta.size());
  std::mt19937_64 rng(schedule.seed);

  const auto eval_val = [&](const TrainableModel& m) {
    return val_windows.empty() ? mean_loss(train_windows, m) : mean_loss(val_windows, m);
  };

  double best_val = eval_val(model);
  result.model = model;
  result.log.push_back({0, mean_loss(train_windows, model), best_val});
  if (!std::isfinite(best_val)) throw NumericFailure("initial loss is not finite");

  int stale = 0;
  std::vector<size_t> order(train_windows.size());
  for (size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const int batch = std::max(1, schedule.batch);
    for (size_t pos = 0; pos < order.size(); pos += batch) {
      const size_t end = std::min(order.size(), pos + batch);
      std::vector<double> grad(theta.size(), 0.0);
      for (size_t k = pos; k < end; ++k) {
        const auto g = param_gradient(train_windows[order[k]], model);
        for (size_t d = 0; d < grad.size(); ++d) grad[d] += g[d];
      }
      const double scale = 1.0 / static_cast<double>(end - pos);
      for (double& g : grad) g *= scale;
      adam.step(theta, grad, schedule.learning_rate);
      project_constraints(theta);
      model.set_parameter_vector(theta);
    }

    const double train_loss = mean_loss(train_windows, model);
    const double val_loss = eval_val(model);
    result.log.push_back({epoch, train_loss, val_loss});
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw NumericFailure("training diverged at epoch " + std::to_string(epoch));
    }
    if (val_loss < best_val) {
      best_val = val_loss;
      result.model = model;
      stale = 0;
    } else if (++stale > schedule.patience) {
      break;
    }
  }
  return result;
}

std::vector<int> tracklet_identities(const std::vector<Tracklet>& tracklets) {
  std::vector<int> out(tracklets.size(), kNoIdentity);
  for (size_t t = 0; t < tracklets.size(); ++t) {
    std::map<int, int> votes;
    for (const Detection& d : tracklets[t].detections) {
      if (d.identity != kNoIdentity) ++votes[d.identity];
    }
    int best = kNoIdentity, best_count = 0;
    for (const auto& [id, count] : votes) {
      if (count > best_count) {
        best = id;
        best_count = count;
      }
    }
    out[t] = best;
  }
  return out;
}

std::vector<int> identity_gt_labels(const std::vector<CrfNode>& nodes,
                                    const std::vector<Tracklet>& tracklets,
                                    const std::vector<int>& identity) {
  // Chain each identity's fragments by start frame; positives are immediate
  // successors only, so each tracklet gets at most one on each side.
  std::map<int, std::vector<int>> by_identity;
  for (size_t t = 0; t < tracklets.size(); ++t) {
    if (identity[t] != kNoIdentity) by_identity[identity[t]].push_back(static_cast<int>(t));
  }
  std::map<int, int> next_of;
  for (auto& [id, members] : by_identity) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      if (tracklets[a].start_frame() != tracklets[b].start_frame()) {
        return tracklets[a].start_frame() < tracklets[b].start_frame();
      }
      return tracklets[a].id < tracklets[b].id;
    });
    for (size_t k = 0; k + 1 < members.size(); ++k) next_of[members[k]] = members[k + 1];
  }
  std::vector<int> labels(nodes.size(), 0);
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto it = next_of.find(nodes[i].first);
    if (it != next_of.end() && it->second == nodes[i].second) labels[i] = 1;
  }
  return labels;
}

std::vector<TrainingWindow> make_training_windows(const std::vector<Tracklet>& tracklets,
                                                  int t_thr, const TrainableModel& m,
                                                  const DifficultPairConfig& cfg, int d_a) {
  CrfGraph g;
  g.nodes = build_nodes(tracklets, t_thr, m.unary);
  g.edges = find_difficult_pairs(g.nodes, tracklets, cfg);
  g.rebuild_adjacency();

  const std::vector<int> identity = tracklet_identities(tracklets);
  const std::vector<int> labels = identity_gt_labels(g.nodes, tracklets, identity);

  std::vector<UnaryFeature> node_features(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i) {
    node_features[i] =
        unary_feature(tracklets[g.nodes[i].first], tracklets[g.nodes[i].second], t_thr);
  }
  std::vector<NodePairFeature> edge_features(g.num_edges());
  for (int e = 0; e < g.num_edges(); ++e) {
    edge_features[e] =
        node_pair_feature(g.nodes[g.edges[e].i], g.nodes[g.edges[e].j], tracklets, d_a);
  }

  std::vector<TrainingWindow> windows;
  for (const auto& [begin, end] : sliding_windows(g.num_nodes(), m.params.window_size,
                                                  m.params.window_overlap)) {
    TrainingWindow w;
    w.graph = subgraph(g, begin, end);
    w.node_features.assign(node_features.begin() + begin, node_features.begin() + end);
    for (int e = 0; e < g.num_edges(); ++e) {
      const CrfEdge& edge = g.edges[e];
      if (edge.i >= begin && edge.i < end && edge.j >= begin && edge.j < end) {
        w.edge_features.push_back(edge_features[e]);
      }
    }
    w.gt_labels.assign(labels.begin() + begin, labels.begin() + end);
    refresh_window(w, m);
    windows.push_back(std::move(w));
  }
  return windows;
}

void plant_labels(std::vector<TrainingWindow>& windows, const TrainableModel& planted) {
  for (TrainingWindow& w : windows) {
    TrainingWindow probe = w;
    refresh_window(probe, planted);
    const InferenceTrace trace = infer(probe.graph, planted.params);
    w.gt_labels = decode(trace.final_q, probe.graph);
  }
}

}  // namespace crfmot
