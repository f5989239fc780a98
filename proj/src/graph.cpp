#include "crfmot/graph.hpp"

#include <algorithm>
#include <ostream>

namespace crfmot {

std::vector<CrfNode> build_nodes(const std::vector<Tracklet>& tracklets, int t_thr,
                                 const UnaryProvider& provider) {
  struct Candidate {
    int first, second, gap;
  };
  std::vector<Candidate> cands;
  const int n = static_cast<int>(tracklets.size());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const int gap = tracklets[b].start_frame() - tracklets[a].end_frame();
      if (gap > 0 && gap < t_thr) cands.push_back({a, b, gap});
    }
  }
  std::sort(cands.begin(), cands.end(), [&](const Candidate& x, const Candidate& y) {
    const int xs = tracklets[x.second].start_frame(), ys = tracklets[y.second].start_frame();
    if (xs != ys) return xs < ys;
    const int xe = tracklets[x.first].end_frame(), ye = tracklets[y.first].end_frame();
    if (xe != ye) return xe < ye;
    if (tracklets[x.first].id != tracklets[y.first].id)
      return tracklets[x.first].id < tracklets[y.first].id;
    return tracklets[x.second].id < tracklets[y.second].id;
  });

  std::vector<CrfNode> nodes;
  nodes.reserve(cands.size());
  for (const Candidate& c : cands) {
    const auto z = unary_probability(tracklets[c.first], tracklets[c.second], t_thr, provider);
    nodes.push_back(make_crf_node(static_cast<int>(nodes.size()), c.first, c.second, c.gap,
                                  t_thr, z));
  }
  return nodes;
}

namespace {

double close_radius(const DifficultPairConfig& cfg, const Detection& a, const Detection& b) {
  if (cfg.tau_close > 0.0) return cfg.tau_close;
  return 2.0 * 0.5 * (a.size.x + b.size.x);
}

bool tails_close(const Tracklet& a, const Tracklet& b, const DifficultPairConfig& cfg) {
  if (std::abs(a.end_frame() - b.end_frame()) > cfg.delta_t) return false;
  const int t_x = std::min(a.end_frame(), b.end_frame());
  const double dist = norm(center_at_frame(a, t_x) - center_at_frame(b, t_x));
  return dist <= close_radius(cfg, a.tail(), b.tail());
}

bool heads_close(const Tracklet& a, const Tracklet& b, const DifficultPairConfig& cfg) {
  if (std::abs(a.start_frame() - b.start_frame()) > cfg.delta_t) return false;
  const int t_y = std::max(a.start_frame(), b.start_frame());
  const double dist = norm(center_at_frame(a, t_y) - center_at_frame(b, t_y));
  return dist <= close_radius(cfg, a.head(), b.head());
}

}  // namespace

std::vector<CrfEdge> find_difficult_pairs(const std::vector<CrfNode>& nodes,
                                          const std::vector<Tracklet>& tracklets,
                                          const DifficultPairConfig& cfg) {
  std::vector<CrfEdge> edges;
  const int n = static_cast<int>(nodes.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const CrfNode& vi = nodes[i];
      const CrfNode& vj = nodes[j];
      CrfEdge e;
      e.i = i;
      e.j = j;
      if (vi.first == vj.first || vi.second == vj.second) {
        e.kind = EdgeKind::Repellency;
        edges.push_back(e);
        continue;
      }
      // A shared tracklet across sides is a legal chain, not a conflict.
      if (vi.first == vj.second || vi.second == vj.first) continue;
      const bool close =
          tails_close(tracklets[vi.first], tracklets[vj.first], cfg) ||
          heads_close(tracklets[vi.second], tracklets[vj.second], cfg);
      if (close) {
        e.kind = EdgeKind::Consistency;
        edges.push_back(e);
      }
    }
  }
  return edges;
}

CrfGraph subgraph(const CrfGraph& g, int begin, int end) {
  CrfGraph s;
  s.nodes.assign(g.nodes.begin() + begin, g.nodes.begin() + end);
  for (int k = 0; k < end - begin; ++k) s.nodes[k].index = k;
  for (const CrfEdge& e : g.edges) {
    if (e.i >= begin && e.i < end && e.j >= begin && e.j < end) {
      CrfEdge c = e;
      c.i -= begin;
      c.j -= begin;
      s.edges.push_back(c);
    }
  }
  s.rebuild_adjacency();
  return s;
}

void set_edge_potentials(CrfGraph& g, const CrfParams& params) {
  for (CrfEdge& e : g.edges) {
    e.potential = pairwise_potential(clamp_prob(e.joint_prob[0]), clamp_prob(e.joint_prob[1]),
                                     params.w_d, params.epsilon);
  }
}

CrfGraph build_graph(const std::vector<Tracklet>& tracklets, int t_thr,
                     const ProviderSet& providers, const DifficultPairConfig& cfg,
                     const CrfParams& params, int d_a) {
  CrfGraph g;
  g.nodes = build_nodes(tracklets, t_thr, *providers.unary);
  g.edges = find_difficult_pairs(g.nodes, tracklets, cfg);
  for (CrfEdge& e : g.edges) {
    const CrfNode& vi = g.nodes[e.i];
    const CrfNode& vj = g.nodes[e.j];
    const NodePairFeature f = node_pair_feature(vi, vj, tracklets, d_a);
    const NodeKey ki{tracklets[vi.first].id, tracklets[vi.second].id};
    const NodeKey kj{tracklets[vj.first].id, tracklets[vj.second].id};
    e.joint_prob = providers.pairwise->joint_prob(e.kind, f, ki, kj);
  }
  set_edge_potentials(g, params);
  g.rebuild_adjacency();
  return g;
}

void dump_graph_csv(const CrfGraph& g, std::ostream& nodes_os, std::ostream& edges_os) {
  nodes_os << "index,first,second,z0,z1\n";
  for (const CrfNode& n : g.nodes) {
    nodes_os << n.index << "," << n.first << "," << n.second << "," << n.unary_prob[0] << ","
             << n.unary_prob[1] << "\n";
  }
  edges_os << "i,j,kind,zi1,zj1,phi00,phi01,phi10,phi11\n";
  for (const CrfEdge& e : g.edges) {
    edges_os << e.i << "," << e.j << ","
             << (e.kind == EdgeKind::Repellency ? "repellency" : "consistency") << ","
             << e.joint_prob[0] << "," << e.joint_prob[1] << "," << e.potential[0][0] << ","
             << e.potential[0][1] << "," << e.potential[1][0] << "," << e.potential[1][1]
             << "\n";
  }
}

}  // namespace crfmot
