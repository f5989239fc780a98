#include "crfmot/tracklets.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace crfmot {

double frame_affinity(const Detection& a, const Detection& b, const LinkThresholds& thr) {
  if (b.frame != a.frame + 1) {
    throw ContractViolation("frame_affinity requires adjacent frames, got " +
                            std::to_string(a.frame) + " and " + std::to_string(b.frame));
  }
  const double sigma_p = 0.5 * (norm(a.size) + norm(b.size));
  const double d2 = dot(a.center - b.center, a.center - b.center);
  const double pos = std::exp(-d2 / (2.0 * sigma_p * sigma_p));

  const double size_l1 = std::abs(a.size.x - b.size.x) + std::abs(a.size.y - b.size.y);
  const double rel = size_l1 / (a.size.x + a.size.y);
  const double size = std::exp(-rel * rel / (2.0 * thr.sigma_size * thr.sigma_size));

  double app = 1.0;
  if (!a.appearance.empty() && !b.appearance.empty()) {
    app = 0.5 * (1.0 + cosine(a.appearance, b.appearance));
  }
  return pos * size * app;
}

std::vector<std::vector<Detection>> group_by_frame(const std::vector<Detection>& dets) {
  std::map<int, std::vector<Detection>> by_frame;
  for (const Detection& d : dets) by_frame[d.frame].push_back(d);
  std::vector<std::vector<Detection>> out;
  out.reserve(by_frame.size());
  for (auto& [frame, group] : by_frame) out.push_back(std::move(group));
  return out;
}

const Detection& most_confident_detection(const Tracklet& t) {
  if (t.empty()) throw ContractViolation("most_confident_detection on empty tracklet");
  int best = 0;
  for (int k = 1; k < t.length(); ++k) {
    if (t.detections[k].confidence > t.detections[best].confidence) best = k;
  }
  return t.detections[best];
}

Vec2 estimate_velocity(const Tracklet& t, TrackletEnd end, int window) {
  if (t.empty()) throw ContractViolation("estimate_velocity on empty tracklet");
  if (t.length() == 1) return {0.0, 0.0};
  if (window < 2) throw ContractViolation("velocity window must be >= 2");
  const int m = std::min(window, t.length());
  const int begin = end == TrackletEnd::kHead ? 0 : t.length() - m;

  double t_mean = 0.0;
  Vec2 c_mean;
  for (int k = begin; k < begin + m; ++k) {
    t_mean += t.detections[k].frame;
    c_mean = c_mean + t.detections[k].center;
  }
  t_mean /= m;
  c_mean = c_mean * (1.0 / m);

  double stt = 0.0;
  Vec2 stc;
  for (int k = begin; k < begin + m; ++k) {
    const double dt = t.detections[k].frame - t_mean;
    stt += dt * dt;
    stc = stc + (t.detections[k].center - c_mean) * dt;
  }
  return stc * (1.0 / stt);
}

Tracklet finalize_tracklet(int id, std::vector<Detection> dets, int velocity_window) {
  Tracklet t;
  t.id = id;
  t.detections = std::move(dets);
  validate_tracklet(t);
  t.head_velocity = estimate_velocity(t, TrackletEnd::kHead, std::max(2, velocity_window));
  t.tail_velocity = estimate_velocity(t, TrackletEnd::kTail, std::max(2, velocity_window));
  t.appearance = most_confident_detection(t).appearance;
  return t;
}

std::vector<Tracklet> link_detections(const std::vector<std::vector<Detection>>& frames,
                                      const LinkThresholds& thr) {
  const int f = static_cast<int>(frames.size());
  // successor[t][i] = index of the linked detection in frames[t+1], or -1.
  std::vector<std::vector<int>> successor(f);
  std::vector<std::vector<int>> predecessor(f);
  for (int t = 0; t < f; ++t) {
    successor[t].assign(frames[t].size(), -1);
    predecessor[t].assign(frames[t].size(), -1);
  }

  struct Candidate {
    double aff;
    int i, j;
  };

  for (int t = 0; t + 1 < f; ++t) {
    const auto& cur = frames[t];
    const auto& nxt = frames[t + 1];
    if (cur.empty() || nxt.empty()) continue;
    if (nxt.front().frame != cur.front().frame + 1) continue;  // gap between groups

    const int n = static_cast<int>(cur.size());
    const int m = static_cast<int>(nxt.size());
    std::vector<double> aff(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) aff[static_cast<size_t>(i) * m + j] = frame_affinity(cur[i], nxt[j], thr);
    }
    // Best and runner-up per row/column give "max over conflicting pairs"
    // without a quadratic rescan.
    std::vector<double> row1(n, -1.0), row2(n, -1.0), col1(m, -1.0), col2(m, -1.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const double a = aff[static_cast<size_t>(i) * m + j];
        if (a > row1[i]) {
          row2[i] = row1[i];
          row1[i] = a;
        } else if (a > row2[i]) {
          row2[i] = a;
        }
        if (a > col1[j]) {
          col2[j] = col1[j];
          col1[j] = a;
        } else if (a > col2[j]) {
          col2[j] = a;
        }
      }
    }

    std::vector<Candidate> winners;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const double a = aff[static_cast<size_t>(i) * m + j];
        if (a < thr.theta_high) continue;
        // Strongest conflicting affinity: best in this row/column with the
        // candidate itself excluded (runner-up when the candidate is the max).
        const double row_rival = (a == row1[i]) ? row2[i] : row1[i];
        const double col_rival = (a == col1[j]) ? col2[j] : col1[j];
        const double rival = std::max(row_rival, col_rival);
        if (rival >= 0.0 && a < thr.theta_margin + rival) continue;
        winners.push_back({a, i, j});
      }
    }
    std::sort(winners.begin(), winners.end(), [](const Candidate& a, const Candidate& b) {
      if (a.aff != b.aff) return a.aff > b.aff;
      if (a.i != b.i) return a.i < b.i;
      return a.j < b.j;
    });
    for (const Candidate& c : winners) {
      if (successor[t][c.i] != -1 || predecessor[t + 1][c.j] != -1) continue;
      successor[t][c.i] = c.j;
      predecessor[t + 1][c.j] = c.i;
    }
  }

  // Maximal chains become tracklets; order by (start frame, index in frame).
  std::vector<Tracklet> out;
  int next_id = 0;
  for (int t = 0; t < f; ++t) {
    for (int i = 0; i < static_cast<int>(frames[t].size()); ++i) {
      if (predecessor[t][i] != -1) continue;  // chain continues an earlier one
      std::vector<Detection> chain;
      int ct = t, ci = i;
      while (true) {
        chain.push_back(frames[ct][ci]);
        const int succ = successor[ct][ci];
        if (succ == -1) break;
        ++ct;
        ci = succ;
      }
      out.push_back(finalize_tracklet(next_id++, std::move(chain), thr.velocity_window));
    }
  }
  return out;
}

}  // namespace crfmot
