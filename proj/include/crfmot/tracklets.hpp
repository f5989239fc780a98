#pragma once

#include "crfmot/core.hpp"

namespace crfmot {

// Two-threshold linking: a frame-to-frame link must clear theta_high and
// beat every conflicting candidate by at least theta_margin.
struct LinkThresholds {
  double theta_high = 0.5;
  double theta_margin = 0.1;
  double sigma_size = 0.3;  // spread of the relative-size factor
  int velocity_window = 5;  // detections used for endpoint velocity fits
};

// Affinity between detections in adjacent frames, in [0,1]. Product of a
// position factor (scale set by the pair's mean box diagonal), a relative
// size factor, and an appearance cosine factor (1 when either side has no
// descriptor). Throws ContractViolation unless b.frame == a.frame + 1.
double frame_affinity(const Detection& a, const Detection& b, const LinkThresholds& thr = {});

// Groups a flat detection list by frame, ascending, for link_detections.
std::vector<std::vector<Detection>> group_by_frame(const std::vector<Detection>& dets);

// Greedy conservative linking of per-frame detections into tracklets.
// Output tracklets partition the input detections; singletons allowed.
std::vector<Tracklet> link_detections(const std::vector<std::vector<Detection>>& frames,
                                      const LinkThresholds& thr = {});

enum class TrackletEnd { kHead, kTail };

// Least-squares slope of center vs. frame over the first (kHead) or last
// (kTail) min(window, length) detections. Single detection -> zero vector.
Vec2 estimate_velocity(const Tracklet& t, TrackletEnd end, int window);

// Maximal confidence; ties broken by earliest frame.
const Detection& most_confident_detection(const Tracklet& t);

// Builds a tracklet from consecutive-frame detections: estimates endpoint
// velocities and picks the representative appearance descriptor.
Tracklet finalize_tracklet(int id, std::vector<Detection> dets, int velocity_window);

}  // namespace crfmot
