#include "crfmot/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace crfmot {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_field(const std::string& s, const std::string& path, int line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw MalformedInput(path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

void write_rows(const std::string& path, const std::vector<std::string>& lines) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw MalformedInput("cannot write " + tmp);
    for (const std::string& l : lines) os << l << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<MotRow> read_mot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open " + path);
  std::vector<MotRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 7) {
      throw MalformedInput(path + ":" + std::to_string(line_no) + ": expected >= 7 fields, got " +
                           std::to_string(fields.size()));
    }
    MotRow r;
    r.frame = static_cast<int>(parse_field(fields[0], path, line_no));
    r.id = static_cast<int>(parse_field(fields[1], path, line_no));
    r.box.left = parse_field(fields[2], path, line_no);
    r.box.top = parse_field(fields[3], path, line_no);
    r.box.width = parse_field(fields[4], path, line_no);
    r.box.height = parse_field(fields[5], path, line_no);
    r.conf = parse_field(fields[6], path, line_no);
    if (fields.size() > 7) r.c7 = parse_field(fields[7], path, line_no);
    if (fields.size() > 8) r.c8 = parse_field(fields[8], path, line_no);
    if (fields.size() > 9) r.c9 = parse_field(fields[9], path, line_no);
    if (r.frame < 1) {
      throw MalformedInput(path + ":" + std::to_string(line_no) + ": frames are 1-based");
    }
    if (!(r.box.width > 0.0) || !(r.box.height > 0.0)) {
      throw MalformedInput(path + ":" + std::to_string(line_no) +
                           ": box width/height must be positive");
    }
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MotRow& a, const MotRow& b) { return a.frame < b.frame; });
  return rows;
}

std::vector<Detection> read_mot_detections(const std::string& path) {
  std::vector<Detection> out;
  for (const MotRow& r : read_mot(path)) {
    out.push_back(box_to_center(r.frame, r.box, r.conf));
  }
  return out;
}

TrackSet read_mot_tracks(const std::string& path, MotRole role, double min_visibility) {
  std::map<int, std::vector<MotRow>> by_id;
  for (const MotRow& r : read_mot(path)) {
    // Ground truth carries flag/class/visibility right after the box.
    if (role == MotRole::kGroundTruth && min_visibility >= 0.0 && r.c8 >= 0.0 &&
        r.c8 < min_visibility) {
      continue;
    }
    by_id[r.id].push_back(r);
  }
  TrackSet ts;
  for (auto& [id, rows] : by_id) {
    Track t;
    t.id = id;
    for (const MotRow& r : rows) {
      Detection d = box_to_center(r.frame, r.box, role == MotRole::kGroundTruth ? 1.0 : r.conf);
      d.identity = id;
      d.interpolated = role == MotRole::kResults && r.conf == 0.0;
      t.detections.push_back(std::move(d));
    }
    t.interpolated.reserve(t.detections.size());
    for (const Detection& d : t.detections) t.interpolated.push_back(d.interpolated);
    ts.tracks.push_back(std::move(t));
  }
  return ts;
}

void write_mot_detections(const std::string& path, const std::vector<Detection>& dets) {
  std::vector<std::string> lines;
  lines.reserve(dets.size());
  for (const Detection& d : dets) {
    const BoxCorner b = center_to_corner(d);
    lines.push_back(std::to_string(d.frame) + ",-1," + format_double(b.left) + "," +
                    format_double(b.top) + "," + format_double(b.width) + "," +
                    format_double(b.height) + "," + format_double(d.confidence) + ",-1,-1,-1");
  }
  write_rows(path, lines);
}

void write_mot_tracks(const std::string& path, const TrackSet& ts, MotRole role) {
  std::vector<std::string> lines;
  for (const Track& t : ts.tracks) {
    for (const Detection& d : t.detections) {
      const BoxCorner b = center_to_corner(d);
      std::string line = std::to_string(d.frame) + "," + std::to_string(t.id) + "," +
                         format_double(b.left) + "," + format_double(b.top) + "," +
                         format_double(b.width) + "," + format_double(b.height);
      if (role == MotRole::kGroundTruth) {
        line += ",1,1,1";
      } else {
        line += "," + format_double(d.confidence) + ",-1,-1,-1";
      }
      lines.push_back(std::move(line));
    }
  }
  write_rows(path, lines);
}

}  // namespace crfmot
