#include "crfmot/association.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include "crfmot/tracklets.hpp"

namespace crfmot {

namespace {

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Greedy matching repair: keep label-1 nodes in confidence order while no
// tracklet is reused on either side.
void repair_labels(const std::vector<CrfNode>& nodes, const std::vector<double>& confidence,
                   std::vector<int>& labels) {
  std::vector<int> on;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (labels[i] == 1) on.push_back(i);
  }
  std::sort(on.begin(), on.end(), [&](int a, int b) {
    if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
    return a < b;
  });
  std::set<int> used_first, used_second;
  for (int i : on) {
    if (used_first.count(nodes[i].first) || used_second.count(nodes[i].second)) {
      labels[i] = 0;
      continue;
    }
    used_first.insert(nodes[i].first);
    used_second.insert(nodes[i].second);
  }
}

}  // namespace

std::vector<std::pair<int, int>> sliding_windows(int node_count, int window_size,
                                                 double overlap) {
  if (window_size <= 0) throw ContractViolation("window size must be positive");
  if (overlap < 0.0 || overlap >= 1.0) throw ContractViolation("overlap must lie in [0,1)");
  std::vector<std::pair<int, int>> out;
  if (node_count <= 0) return out;
  const int step =
      std::max(1, static_cast<int>(std::ceil(window_size * (1.0 - overlap))));
  int start = 0;
  while (true) {
    const int end = std::min(start + window_size, node_count);
    out.emplace_back(start, end);
    if (end >= node_count) break;
    start += step;
  }
  return out;
}

AssociationResult associate_crf(const std::vector<Tracklet>& tracklets, int t_thr,
                                const CrfParams& params, const ProviderSet& providers,
                                const DifficultPairConfig& cfg, int d_a, int jobs) {
  AssociationResult res;
  res.graph.nodes = build_nodes(tracklets, t_thr, *providers.unary);
  res.graph.rebuild_adjacency();
  const int n = res.graph.num_nodes();
  res.labels.assign(n, 0);
  res.label_confidence.assign(n, 0.0);
  res.windows = sliding_windows(n, params.window_size, params.window_overlap);

  // Difficult pairs and their potentials are built inside each window; the
  // window bounds the CRF, so edge work stays quadratic in the window size
  // instead of the (possibly huge) global node count.
  const int w = static_cast<int>(res.windows.size());
  std::vector<std::vector<int>> window_labels(w);
  std::vector<std::vector<double>> window_q1(w);
  res.window_energies.resize(w);
  parallel_for(w, jobs, [&](int k) {
    const auto [begin, end] = res.windows[k];
    CrfGraph sub;
    sub.nodes.assign(res.graph.nodes.begin() + begin, res.graph.nodes.begin() + end);
    for (int i = 0; i < end - begin; ++i) sub.nodes[i].index = i;
    sub.edges = find_difficult_pairs(sub.nodes, tracklets, cfg);
    for (CrfEdge& e : sub.edges) {
      const CrfNode& vi = sub.nodes[e.i];
      const CrfNode& vj = sub.nodes[e.j];
      const NodePairFeature f = node_pair_feature(vi, vj, tracklets, d_a);
      const NodeKey ki{tracklets[vi.first].id, tracklets[vi.second].id};
      const NodeKey kj{tracklets[vj.first].id, tracklets[vj.second].id};
      e.joint_prob = providers.pairwise->joint_prob(e.kind, f, ki, kj);
    }
    set_edge_potentials(sub, params);
    sub.rebuild_adjacency();
    const InferenceTrace trace = infer(sub, params);
    window_labels[k] = decode(trace.final_q, sub);
    window_q1[k].resize(end - begin);
    for (int i = 0; i < end - begin; ++i) window_q1[k][i] = trace.final_q.q[i][1];
    res.window_energies[k] = trace.energies;
  });

  // A window's trailing overlap is provisional; the node is owned by the
  // first window where it sits before the next window's start.
  for (int k = 0; k < w; ++k) {
    const auto [begin, end] = res.windows[k];
    const int owned_end = k + 1 < w ? std::min(end, res.windows[k + 1].first) : end;
    for (int i = begin; i < owned_end; ++i) {
      res.labels[i] = window_labels[k][i - begin];
      res.label_confidence[i] = window_q1[k][i - begin];
    }
  }
  repair_labels(res.graph.nodes, res.label_confidence, res.labels);
  return res;
}

AssociationResult associate_unary(const std::vector<Tracklet>& tracklets, int t_thr,
                                  const CrfParams& params, const UnaryProvider& provider) {
  AssociationResult res;
  res.graph.nodes = build_nodes(tracklets, t_thr, provider);
  res.graph.rebuild_adjacency();
  const int n = res.graph.num_nodes();
  res.labels.assign(n, 0);
  res.label_confidence.assign(n, 0.0);
  for (int i = 0; i < n; ++i) res.label_confidence[i] = res.graph.nodes[i].unary_prob[1];
  if (n == 0) return res;

  std::vector<int> rows, cols;  // tracklet indices with a candidate on that side
  for (const CrfNode& node : res.graph.nodes) {
    rows.push_back(node.first);
    cols.push_back(node.second);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

  std::map<std::pair<int, int>, int> node_of;
  for (const CrfNode& node : res.graph.nodes) {
    node_of[{node.first, node.second}] = node.index;
  }

  const double c0 = -std::log(0.5);
  const double forbidden = 1000.0;  // never beats the c0 dummy
  std::vector<std::vector<double>> cost(rows.size(),
                                        std::vector<double>(cols.size(), forbidden));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < cols.size(); ++c) {
      const auto it = node_of.find({rows[r], cols[c]});
      if (it != node_of.end()) {
        cost[r][c] = -std::log(res.graph.nodes[it->second].unary_prob[1] + params.epsilon);
      }
    }
  }
  const Assignment asg = hungarian(cost, c0);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (asg.row_to_col[r] < 0) continue;
    const auto it = node_of.find({rows[r], cols[asg.row_to_col[r]]});
    if (it != node_of.end()) res.labels[it->second] = 1;
  }
  return res;
}

bool labels_satisfy_matching(const std::vector<CrfNode>& nodes,
                             const std::vector<int>& labels) {
  std::set<int> used_first, used_second;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    if (!used_first.insert(nodes[i].first).second) return false;
    if (!used_second.insert(nodes[i].second).second) return false;
  }
  return true;
}

TrackSet stitch(const std::vector<Tracklet>& tracklets, const std::vector<CrfNode>& nodes,
                const std::vector<int>& labels) {
  const int t = static_cast<int>(tracklets.size());
  std::vector<int> succ(t, -1), pred(t, -1);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    const CrfNode& n = nodes[i];
    if (succ[n.first] != -1 || pred[n.second] != -1) {
      throw ContractViolation("stitch: branching links (labels violate the matching rule)");
    }
    succ[n.first] = n.second;
    pred[n.second] = n.first;
  }

  std::vector<std::vector<int>> chains;
  int visited = 0;
  for (int s = 0; s < t; ++s) {
    if (pred[s] != -1) continue;
    std::vector<int> chain;
    for (int cur = s; cur != -1; cur = succ[cur]) {
      chain.push_back(cur);
      ++visited;
      if (static_cast<int>(chain.size()) > t) {
        throw ContractViolation("stitch: cyclic links");
      }
    }
    chains.push_back(std::move(chain));
  }
  if (visited != t) throw ContractViolation("stitch: cyclic links");

  std::sort(chains.begin(), chains.end(), [&](const auto& a, const auto& b) {
    const int sa = tracklets[a.front()].start_frame();
    const int sb = tracklets[b.front()].start_frame();
    if (sa != sb) return sa < sb;
    return tracklets[a.front()].id < tracklets[b.front()].id;
  });

  TrackSet out;
  for (size_t c = 0; c < chains.size(); ++c) {
    Track track;
    track.id = static_cast<int>(c) + 1;
    for (int idx : chains[c]) {
      const Tracklet& piece = tracklets[idx];
      if (!track.detections.empty() &&
          piece.start_frame() <= track.detections.back().frame) {
        throw ContractViolation("stitch: chain is not time-ordered");
      }
      track.detections.insert(track.detections.end(), piece.detections.begin(),
                              piece.detections.end());
    }
    track.interpolated.reserve(track.detections.size());
    for (const Detection& d : track.detections) track.interpolated.push_back(d.interpolated);
    out.tracks.push_back(std::move(track));
  }
  return out;
}

Track interpolate(Track track) {
  if (track.detections.size() < 2) return track;
  std::vector<Detection> filled;
  filled.push_back(track.detections.front());
  for (size_t k = 1; k < track.detections.size(); ++k) {
    const Detection& a = track.detections[k - 1];
    const Detection& b = track.detections[k];
    for (int f = a.frame + 1; f < b.frame; ++f) {
      const double alpha = static_cast<double>(f - a.frame) / (b.frame - a.frame);
      Detection d;
      d.frame = f;
      d.center = a.center + (b.center - a.center) * alpha;
      d.size = a.size + (b.size - a.size) * alpha;
      d.confidence = 0.0;
      d.interpolated = true;
      filled.push_back(d);
    }
    filled.push_back(b);
  }
  track.detections = std::move(filled);
  track.interpolated.clear();
  track.interpolated.reserve(track.detections.size());
  for (const Detection& d : track.detections) track.interpolated.push_back(d.interpolated);
  return track;
}

std::vector<Tracklet> tracks_to_tracklets(const TrackSet& ts, int velocity_window) {
  std::vector<Tracklet> out;
  out.reserve(ts.tracks.size());
  for (const Track& track : ts.tracks) {
    const Track filled = interpolate(track);
    out.push_back(finalize_tracklet(track.id, filled.detections, velocity_window));
  }
  return out;
}

TrackSet two_round(const std::vector<Tracklet>& tracklets, const CrfParams& params,
                   const ProviderSet& providers, const DifficultPairConfig& cfg, int d_a,
                   AssociationMode mode, int velocity_window, int jobs,
                   TwoRoundTrace* trace) {
  const auto associate = [&](const std::vector<Tracklet>& ts, int t_thr,
                             const std::string& tag) {
    AssociationResult r;
    if (mode == AssociationMode::kCrf) {
      r = associate_crf(ts, t_thr, params, providers, cfg, d_a, jobs);
      if (trace) {
        for (size_t k = 0; k < r.window_energies.size(); ++k) {
          trace->energy_traces.emplace_back(tag + "_w" + std::to_string(k),
                                            r.window_energies[k]);
        }
      }
    } else {
      r = associate_unary(ts, t_thr, params, *providers.unary);
    }
    return stitch(ts, r.graph.nodes, r.labels);
  };

  const TrackSet round1 = associate(tracklets, params.t_thr_round1, "round1");
  const std::vector<Tracklet> merged = tracks_to_tracklets(round1, velocity_window);
  TrackSet round2 = associate(merged, params.t_thr_round2, "round2");
  for (Track& t : round2.tracks) t = interpolate(std::move(t));
  return round2;
}

}  // namespace crfmot
