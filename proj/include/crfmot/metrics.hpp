#pragma once

#include <string>

#include "crfmot/association.hpp"

namespace crfmot {

struct MetricsReport {
  double mota = 0.0;
  double motp = 0.0;
  double idf1 = 0.0;
  double mt = 0.0;  // fraction of gt tracks covered >= 80%
  double ml = 0.0;  // fraction covered <= 20%
  int fp = 0;
  int fn = 0;
  int ids = 0;
  int fm = 0;
  int gt_boxes = 0;
  int result_boxes = 0;
  int matches = 0;
};

// CLEAR protocol: carry the previous frame's correspondences while they stay
// above the IoU threshold, match the remainder by Hungarian on IoU, then
// count FP/FN/IDS per frame. IDF1 comes from a global identity-level
// assignment maximizing matched frames.
MetricsReport evaluate(const TrackSet& gt, const TrackSet& result, double iou_threshold = 0.5);

// Drops every box outside [first, last] (used to clamp mismatched ranges).
TrackSet clip_frames(const TrackSet& ts, int first, int last);
std::pair<int, int> frame_range(const TrackSet& ts);

std::string format_report(const MetricsReport& r);
std::string report_csv_header();
std::string report_csv(const MetricsReport& r);

}  // namespace crfmot
