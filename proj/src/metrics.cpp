#include "crfmot/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "crfmot/assignment.hpp"

namespace crfmot {

namespace {

struct FrameBox {
  int track = 0;  // index into the TrackSet
  const Detection* det = nullptr;
};

// frame -> boxes present, in TrackSet order.
std::map<int, std::vector<FrameBox>> index_frames(const TrackSet& ts) {
  std::map<int, std::vector<FrameBox>> out;
  for (size_t t = 0; t < ts.tracks.size(); ++t) {
    for (const Detection& d : ts.tracks[t].detections) {
      out[d.frame].push_back({static_cast<int>(t), &d});
    }
  }
  return out;
}

}  // namespace

std::pair<int, int> frame_range(const TrackSet& ts) {
  int first = 0, last = -1;
  bool any = false;
  for (const Track& t : ts.tracks) {
    for (const Detection& d : t.detections) {
      if (!any || d.frame < first) first = d.frame;
      if (!any || d.frame > last) last = d.frame;
      any = true;
    }
  }
  return {first, last};
}

TrackSet clip_frames(const TrackSet& ts, int first, int last) {
  TrackSet out;
  for (const Track& t : ts.tracks) {
    Track c;
    c.id = t.id;
    for (size_t k = 0; k < t.detections.size(); ++k) {
      if (t.detections[k].frame >= first && t.detections[k].frame <= last) {
        c.detections.push_back(t.detections[k]);
        c.interpolated.push_back(k < t.interpolated.size() ? t.interpolated[k] : false);
      }
    }
    if (!c.detections.empty()) out.tracks.push_back(std::move(c));
  }
  return out;
}

MetricsReport evaluate(const TrackSet& gt, const TrackSet& result, double iou_threshold) {
  MetricsReport rep;
  const auto gt_frames = index_frames(gt);
  const auto res_frames = index_frames(result);

  const int n_gt_tracks = static_cast<int>(gt.tracks.size());
  std::vector<int> gt_present(n_gt_tracks, 0);
  std::vector<int> gt_covered(n_gt_tracks, 0);
  // Matched-status bookkeeping for FM: was this gt track ever matched, and
  // was it matched at its previous existing frame?
  std::vector<char> ever_matched(n_gt_tracks, 0);
  std::vector<char> prev_status(n_gt_tracks, 0);
  std::vector<char> in_gap(n_gt_tracks, 0);

  std::map<int, int> last_match;   // gt track -> result track (persists)
  std::map<int, int> prev_frame;   // gt track -> result track (previous frame only)

  std::set<int> frames;
  for (const auto& [f, boxes] : gt_frames) frames.insert(f);
  for (const auto& [f, boxes] : res_frames) frames.insert(f);

  double iou_sum = 0.0;

  for (int f : frames) {
    static const std::vector<FrameBox> kEmpty;
    const auto git = gt_frames.find(f);
    const auto rit = res_frames.find(f);
    const std::vector<FrameBox>& g = git != gt_frames.end() ? git->second : kEmpty;
    const std::vector<FrameBox>& r = rit != res_frames.end() ? rit->second : kEmpty;
    rep.gt_boxes += static_cast<int>(g.size());
    rep.result_boxes += static_cast<int>(r.size());

    std::vector<char> g_done(g.size(), 0), r_done(r.size(), 0);
    std::map<int, int> current;  // gt track -> result track this frame
    std::vector<std::pair<int, int>> matched_pairs;  // indices into g, r

    // Carry over still-valid correspondences.
    for (size_t gi = 0; gi < g.size(); ++gi) {
      const auto pit = prev_frame.find(g[gi].track);
      if (pit == prev_frame.end()) continue;
      for (size_t ri = 0; ri < r.size(); ++ri) {
        if (r_done[ri] || r[ri].track != pit->second) continue;
        if (iou(*g[gi].det, *r[ri].det) >= iou_threshold) {
          g_done[gi] = r_done[ri] = 1;
          matched_pairs.emplace_back(static_cast<int>(gi), static_cast<int>(ri));
        }
        break;
      }
    }

    // Hungarian over the remainder; pairs below the threshold are blocked by
    // a cost above the no-assignment dummy.
    std::vector<int> g_rest, r_rest;
    for (size_t gi = 0; gi < g.size(); ++gi) {
      if (!g_done[gi]) g_rest.push_back(static_cast<int>(gi));
    }
    for (size_t ri = 0; ri < r.size(); ++ri) {
      if (!r_done[ri]) r_rest.push_back(static_cast<int>(ri));
    }
    if (!g_rest.empty() && !r_rest.empty()) {
      std::vector<std::vector<double>> cost(g_rest.size(),
                                            std::vector<double>(r_rest.size(), 2.0));
      for (size_t a = 0; a < g_rest.size(); ++a) {
        for (size_t b = 0; b < r_rest.size(); ++b) {
          const double v = iou(*g[g_rest[a]].det, *r[r_rest[b]].det);
          if (v >= iou_threshold) cost[a][b] = 1.0 - v;
        }
      }
      const Assignment asg = hungarian(cost, 1.5);
      for (size_t a = 0; a < g_rest.size(); ++a) {
        const int b = asg.row_to_col[a];
        if (b >= 0 && cost[a][b] <= 1.0 - iou_threshold) {
          matched_pairs.emplace_back(g_rest[a], r_rest[b]);
        }
      }
    }

    for (const auto& [gi, ri] : matched_pairs) {
      const int g_track = g[gi].track;
      const int r_track = r[ri].track;
      current[g_track] = r_track;
      iou_sum += iou(*g[gi].det, *r[ri].det);
      ++rep.matches;
      const auto lit = last_match.find(g_track);
      if (lit != last_match.end() && lit->second != r_track) ++rep.ids;
      last_match[g_track] = r_track;
    }

    rep.fn += static_cast<int>(g.size() - matched_pairs.size());
    rep.fp += static_cast<int>(r.size() - matched_pairs.size());

    // Per-track coverage and fragmentation bookkeeping.
    for (const FrameBox& box : g) {
      const int t = box.track;
      const bool matched = current.count(t) > 0;
      ++gt_present[t];
      if (matched) {
        ++gt_covered[t];
        if (ever_matched[t] && in_gap[t]) ++rep.fm;
        ever_matched[t] = 1;
        in_gap[t] = 0;
      } else if (ever_matched[t]) {
        in_gap[t] = 1;
      }
      prev_status[t] = matched;
    }
    prev_frame = std::move(current);
  }

  const int errors = rep.fp + rep.fn + rep.ids;
  rep.mota = 1.0 - static_cast<double>(errors) / std::max(1, rep.gt_boxes);
  rep.motp = rep.matches > 0
                 ? iou_sum / rep.matches
                 : (rep.gt_boxes == 0 && rep.result_boxes == 0 ? 1.0 : 0.0);

  // IDF1: identity-level assignment maximizing the number of frames where a
  // gt track and a result track are spatially matched.
  std::map<std::pair<int, int>, int> overlap;
  {
    for (const auto& [f, g] : gt_frames) {
      const auto rit = res_frames.find(f);
      if (rit == res_frames.end()) continue;
      for (const FrameBox& gb : g) {
        for (const FrameBox& rb : rit->second) {
          if (iou(*gb.det, *rb.det) >= iou_threshold) {
            ++overlap[{gb.track, rb.track}];
          }
        }
      }
    }
  }
  const int n_res_tracks = static_cast<int>(result.tracks.size());
  int idtp = 0;
  if (n_gt_tracks > 0 && n_res_tracks > 0) {
    std::vector<std::vector<double>> cost(n_gt_tracks, std::vector<double>(n_res_tracks, 0.0));
    for (const auto& [pair, count] : overlap) cost[pair.first][pair.second] = -count;
    const Assignment asg = hungarian(cost, 0.0);
    for (int t = 0; t < n_gt_tracks; ++t) {
      if (asg.row_to_col[t] >= 0) idtp += -static_cast<int>(cost[t][asg.row_to_col[t]]);
    }
  }
  rep.idf1 = (rep.gt_boxes + rep.result_boxes) > 0
                 ? 2.0 * idtp / static_cast<double>(rep.gt_boxes + rep.result_boxes)
                 : 1.0;

  int mt = 0, ml = 0;
  for (int t = 0; t < n_gt_tracks; ++t) {
    if (gt_present[t] == 0) continue;
    const double cover = static_cast<double>(gt_covered[t]) / gt_present[t];
    if (cover >= 0.8) ++mt;
    if (cover <= 0.2) ++ml;
  }
  rep.mt = n_gt_tracks > 0 ? static_cast<double>(mt) / n_gt_tracks : 0.0;
  rep.ml = n_gt_tracks > 0 ? static_cast<double>(ml) / n_gt_tracks : 0.0;
  return rep;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::setw(8) << "MOTA" << std::setw(8) << "MOTP" << std::setw(8) << "IDF1"
     << std::setw(8) << "MT" << std::setw(8) << "ML" << std::setw(7) << "FP" << std::setw(7)
     << "FN" << std::setw(6) << "IDS" << std::setw(6) << "FM" << "\n";
  os << std::setw(8) << r.mota << std::setw(8) << r.motp << std::setw(8) << r.idf1
     << std::setw(8) << r.mt << std::setw(8) << r.ml << std::setw(7) << r.fp << std::setw(7)
     << r.fn << std::setw(6) << r.ids << std::setw(6) << r.fm << "\n";
  return os.str();
}

std::string report_csv_header() {
  return "mota,motp,idf1,mt,ml,fp,fn,ids,fm,gt_boxes,result_boxes,matches";
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << r.mota << "," << r.motp << "," << r.idf1 << "," << r.mt << "," << r.ml << "," << r.fp
     << "," << r.fn << "," << r.ids << "," << r.fm << "," << r.gt_boxes << ","
     << r.result_boxes << "," << r.matches;
  return os.str();
}

}  // namespace crfmot
