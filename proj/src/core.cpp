#include "crfmot/core.hpp"

#include <algorithm>
#include <cstdlib>

namespace crfmot {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty() || a.size() != b.size()) return 0.0;
  double d = 0.0, na = 0.0, nb = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    d += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return d / std::sqrt(na * nb);
}

Detection box_to_center(int frame, const BoxCorner& box, double confidence) {
  if (!(box.width > 0.0) || !(box.height > 0.0)) {
    throw MalformedInput("box width/height must be strictly positive, got " +
                         std::to_string(box.width) + "x" + std::to_string(box.height));
  }
  Detection d;
  d.frame = frame;
  d.center = {box.left + box.width / 2.0, box.top + box.height / 2.0};
  d.size = {box.width, box.height};
  d.confidence = confidence;
  return d;
}

BoxCorner center_to_corner(const Detection& d) {
  return {d.center.x - d.size.x / 2.0, d.center.y - d.size.y / 2.0, d.size.x, d.size.y};
}

double iou(const Detection& a, const Detection& b) {
  const BoxCorner ca = center_to_corner(a);
  const BoxCorner cb = center_to_corner(b);
  const double ix = std::min(ca.left + ca.width, cb.left + cb.width) - std::max(ca.left, cb.left);
  const double iy = std::min(ca.top + ca.height, cb.top + cb.height) - std::max(ca.top, cb.top);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = ca.width * ca.height + cb.width * cb.height - inter;
  return inter / uni;
}

void validate_detection(const Detection& d) {
  if (!(d.size.x > 0.0) || !(d.size.y > 0.0)) {
    throw ContractViolation("detection size must be strictly positive");
  }
  if (d.confidence < 0.0 || d.confidence > 1.0) {
    throw ContractViolation("detection confidence outside [0,1]");
  }
  if (!d.appearance.empty()) {
    double n2 = 0.0;
    for (double v : d.appearance) n2 += v * v;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) {
      throw ContractViolation("appearance descriptor is not unit-normalized");
    }
  }
}

void validate_tracklet(const Tracklet& t) {
  if (t.empty()) throw ContractViolation("tracklet has no detections");
  for (int k = 1; k < t.length(); ++k) {
    if (t.detections[k].frame != t.detections[k - 1].frame + 1) {
      throw ContractViolation("tracklet " + std::to_string(t.id) +
                              " frames are not consecutive at position " + std::to_string(k));
    }
  }
}

CrfNode make_crf_node(int index, int first, int second, int gap, int t_thr,
                      std::array<double, 2> unary_prob) {
  if (!(gap > 0 && gap < t_thr)) {
    throw ContractViolation("node gap " + std::to_string(gap) +
                            " violates 0 < gap < " + std::to_string(t_thr));
  }
  for (double z : unary_prob) {
    if (z < 0.0 || z > 1.0) throw ContractViolation("unary probability outside [0,1]");
  }
  if (std::abs(unary_prob[0] + unary_prob[1] - 1.0) > 1e-9) {
    throw ContractViolation("unary probabilities do not sum to 1");
  }
  CrfNode n;
  n.index = index;
  n.first = first;
  n.second = second;
  n.unary_prob = unary_prob;
  return n;
}

void CrfGraph::rebuild_adjacency() {
  adjacency.assign(nodes.size(), {});
  for (int e = 0; e < num_edges(); ++e) {
    adjacency[edges[e].i].push_back(e);
    adjacency[edges[e].j].push_back(e);
  }
}

void CrfGraph::validate() const {
  const int n = num_nodes();
  if (static_cast<int>(adjacency.size()) != n) {
    throw ContractViolation("adjacency size does not match node count");
  }
  std::vector<std::pair<int, int>> seen;
  for (const CrfEdge& e : edges) {
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) {
      throw ContractViolation("edge endpoint out of range");
    }
    if (e.i == e.j) throw ContractViolation("self-loop edge");
    seen.emplace_back(std::min(e.i, e.j), std::max(e.i, e.j));
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ContractViolation("duplicate unordered edge pair");
  }
  std::vector<int> incident_count(n, 0);
  for (int v = 0; v < n; ++v) {
    for (int e : adjacency[v]) {
      if (e < 0 || e >= num_edges()) throw ContractViolation("adjacency references bad edge");
      if (edges[e].i != v && edges[e].j != v) {
        throw ContractViolation("adjacency lists edge not incident to node");
      }
      ++incident_count[v];
    }
  }
  for (const CrfEdge& e : edges) {
    --incident_count[e.i];
    --incident_count[e.j];
  }
  for (int c : incident_count) {
    if (c != 0) throw ContractViolation("edge missing from an endpoint adjacency list");
  }
}

void validate_params(const CrfParams& p) {
  if (p.w_u < 0.0 || p.w_d < 0.0) throw ContractViolation("potential weights must be >= 0");
  if (!(p.gamma > 0.0)) throw ContractViolation("gamma must be > 0");
  if (!(p.epsilon > 0.0)) throw ContractViolation("epsilon must be > 0");
  if (p.iterations < 0) throw ContractViolation("iteration count must be >= 0");
  if (p.window_size <= 0) throw ContractViolation("window size must be positive");
  if (p.window_overlap < 0.0 || p.window_overlap >= 1.0) {
    throw ContractViolation("window overlap must lie in [0,1)");
  }
}

}  // namespace crfmot
