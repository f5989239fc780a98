#pragma once

#include <string>

#include "crfmot/association.hpp"

namespace crfmot {

// MOTChallenge CSV: frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z.
// Detections carry id = -1 and x,y,z = -1; ground-truth rows carry
// flag/class/visibility in the three columns after the box.
enum class MotRole { kDetections, kGroundTruth, kResults };

struct MotRow {
  int frame = 1;
  int id = -1;
  BoxCorner box;
  double conf = 1.0;
  // Trailing columns: (x, y, z) for detections/results, or
  // (flag, class, visibility) for ground truth.
  double c7 = -1.0, c8 = -1.0, c9 = -1.0;
};

// Throws MalformedInput (with the line number) on bad rows; out-of-order
// frames are accepted and sorted.
std::vector<MotRow> read_mot(const std::string& path);

std::vector<Detection> read_mot_detections(const std::string& path);

// Groups rows by id; for ground truth, rows with visibility below
// min_visibility are dropped when min_visibility >= 0.
TrackSet read_mot_tracks(const std::string& path, MotRole role, double min_visibility = -1.0);

void write_mot_detections(const std::string& path, const std::vector<Detection>& dets);
void write_mot_tracks(const std::string& path, const TrackSet& ts, MotRole role);

}  // namespace crfmot
