#pragma once

#include <cstdint>

#include "crfmot/association.hpp"

namespace crfmot {

struct SceneConfig {
  int n_targets = 8;
  int n_frames = 200;
  double arena_w = 1280.0;
  double arena_h = 720.0;
  double speed_min = 1.0;  // px/frame
  double speed_max = 4.0;
  double dir_change_prob = 0.02;  // per frame, free-roaming targets only
  int crossings = 3;              // constructed crossing events
  double miss_rate = 0.05;
  double fp_rate = 0.1;    // probability of one false positive per frame
  double pos_noise = 1.0;  // px, detection center noise
  double app_noise = 0.05;
  int occlusion_max = 8;  // max consecutive dropped frames; 0 disables dropouts
  std::uint64_t seed = 1;
  int d_a = 16;
};

void validate_scene_config(const SceneConfig& cfg);

struct Scene {
  TrackSet gt;                        // identity carried in detections and track ids
  std::vector<Detection> detections;  // frame-sorted, identity filled for analysis
  int crossing_intervals = 0;         // verified (pair, maximal overlap run) count
};

// Piecewise-constant-velocity targets reflecting at the arena borders, with
// constructed crossing events, per-identity appearance vectors, Bernoulli
// misses, bounded occlusion dropouts, and uniform false positives.
// Deterministic for a given config.
Scene generate_scene(const SceneConfig& cfg);

}  // namespace crfmot
