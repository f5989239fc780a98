#include <doctest.h>

#include <fstream>
#include <sstream>

#include "crfmot/mot_io.hpp"
#include "crfmot/simulator.hpp"

using namespace crfmot;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
}

}  // namespace

TEST_CASE("single detection row") {
  spit("io_single.txt", "1,-1,10,20,30,40,0.9,-1,-1,-1\n");
  const auto dets = read_mot_detections("io_single.txt");
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].frame == 1);
  CHECK(dets[0].center.x == 25.0);
  CHECK(dets[0].center.y == 40.0);
  CHECK(dets[0].confidence == 0.9);
}

TEST_CASE("write-read-write identity on canonical files") {
  SceneConfig cfg;
  cfg.n_targets = 4;
  cfg.n_frames = 40;
  cfg.fp_rate = 0.3;
  cfg.seed = 2;
  const Scene s = generate_scene(cfg);

  SUBCASE("detections") {
    write_mot_detections("io_det.txt", s.detections);
    const auto dets = read_mot_detections("io_det.txt");
    write_mot_detections("io_det2.txt", dets);
    CHECK(slurp("io_det.txt") == slurp("io_det2.txt"));
  }
  SUBCASE("ground truth") {
    write_mot_tracks("io_gt.txt", s.gt, MotRole::kGroundTruth);
    const TrackSet gt = read_mot_tracks("io_gt.txt", MotRole::kGroundTruth);
    write_mot_tracks("io_gt2.txt", gt, MotRole::kGroundTruth);
    CHECK(slurp("io_gt.txt") == slurp("io_gt2.txt"));
  }
  SUBCASE("hand-written canonical rows") {
    const std::string canon = "1,-1,10.5,20,30,40,0.9,-1,-1,-1\n2,-1,11,21,30,40,0.25,-1,-1,-1\n";
    spit("io_canon.txt", canon);
    write_mot_detections("io_canon2.txt", read_mot_detections("io_canon.txt"));
    CHECK(slurp("io_canon2.txt") == canon);
  }
}

TEST_CASE("malformed rows are rejected with line numbers") {
  SUBCASE("six fields") {
    spit("io_bad.txt", "1,-1,10,20,30,40\n");
    try {
      read_mot("io_bad.txt");
      CHECK(false);
    } catch (const MalformedInput& e) {
      CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
  }
  SUBCASE("bad number on the second line") {
    spit("io_bad2.txt", "1,-1,10,20,30,40,0.9,-1,-1,-1\n2,-1,xx,20,30,40,0.9,-1,-1,-1\n");
    try {
      read_mot("io_bad2.txt");
      CHECK(false);
    } catch (const MalformedInput& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("nonpositive box") {
    spit("io_bad3.txt", "1,-1,10,20,0,40,0.9,-1,-1,-1\n");
    CHECK_THROWS_AS(read_mot("io_bad3.txt"), MalformedInput);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_mot("does_not_exist.txt"), MalformedInput);
  }
}

TEST_CASE("out-of-order frames are accepted and sorted") {
  spit("io_order.txt",
       "3,-1,10,20,30,40,0.9,-1,-1,-1\n1,-1,10,20,30,40,0.9,-1,-1,-1\n2,-1,10,20,30,40,0.9,-1,-1,-1\n");
  const auto dets = read_mot_detections("io_order.txt");
  REQUIRE(dets.size() == 3);
  CHECK(dets[0].frame == 1);
  CHECK(dets[1].frame == 2);
  CHECK(dets[2].frame == 3);
}

TEST_CASE("ground-truth visibility filtering") {
  spit("io_vis.txt",
       "1,7,10,20,30,40,1,1,0.9\n2,7,10,20,30,40,1,1,0.3\n3,7,10,20,30,40,1,1,0.6\n");
  const TrackSet all = read_mot_tracks("io_vis.txt", MotRole::kGroundTruth);
  REQUIRE(all.tracks.size() == 1);
  CHECK(all.tracks[0].detections.size() == 3);
  const TrackSet vis = read_mot_tracks("io_vis.txt", MotRole::kGroundTruth, 0.5);
  REQUIRE(vis.tracks.size() == 1);
  CHECK(vis.tracks[0].detections.size() == 2);
}

TEST_CASE("result rows carry interpolation as zero confidence") {
  TrackSet ts;
  Track t;
  t.id = 3;
  Detection a;
  a.frame = 1;
  a.center = {10, 10};
  a.size = {4, 4};
  a.confidence = 0.9;
  Detection b = a;
  b.frame = 2;
  b.confidence = 0.0;
  b.interpolated = true;
  t.detections = {a, b};
  t.interpolated = {false, true};
  ts.tracks.push_back(t);
  write_mot_tracks("io_res.txt", ts, MotRole::kResults);
  const TrackSet back = read_mot_tracks("io_res.txt", MotRole::kResults);
  REQUIRE(back.tracks.size() == 1);
  CHECK(back.tracks[0].interpolated == std::vector<bool>{false, true});
}
