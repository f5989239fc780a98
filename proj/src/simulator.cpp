#include "crfmot/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace crfmot {

void validate_scene_config(const SceneConfig& cfg) {
  if (cfg.n_targets < 0 || cfg.n_frames <= 0) {
    throw MalformedInput("scene needs n_targets >= 0 and n_frames > 0");
  }
  if (!(cfg.arena_w > 0.0) || !(cfg.arena_h > 0.0)) {
    throw MalformedInput("arena dimensions must be positive");
  }
  for (double rate : {cfg.miss_rate, cfg.fp_rate}) {
    if (rate < 0.0 || rate > 1.0) throw MalformedInput("rates must lie in [0,1]");
  }
  if (cfg.speed_min < 0.0 || cfg.speed_max < cfg.speed_min) {
    throw MalformedInput("bad speed range");
  }
  if (cfg.pos_noise < 0.0 || cfg.app_noise < 0.0 || cfg.occlusion_max < 0 ||
      cfg.crossings < 0 || cfg.d_a <= 0) {
    throw MalformedInput("bad scene config value");
  }
}

namespace {

double fold(double x, double lo, double hi) {
  const double len = hi - lo;
  if (len <= 0.0) return lo;
  double u = std::fmod(x - lo, 2.0 * len);
  if (u < 0.0) u += 2.0 * len;
  return lo + (u <= len ? u : 2.0 * len - u);
}

struct Meeting {
  int frame = 0;
  Vec2 point;
  double speed = 0.0;
  double angle = 0.0;
};

std::vector<double> random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = gauss(rng);
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  } else {
    v[0] = 1.0;
  }
  return v;
}

Scene generate_once(const SceneConfig& cfg, int attempt) {
  std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (attempt + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kTau = 2.0 * std::numbers::pi;

  const int n = cfg.n_targets;
  Scene scene;

  std::vector<Vec2> sizes(n);
  std::vector<std::vector<double>> base_app(n);
  for (int t = 0; t < n; ++t) {
    sizes[t] = {24.0 + 16.0 * unit(rng), 48.0 + 32.0 * unit(rng)};
    base_app[t] = random_unit_vector(rng, cfg.d_a);
  }

  // Constructed crossing events: both targets of a pair pass through one
  // point at the same frame.
  std::vector<std::vector<Meeting>> meetings(n);
  std::vector<std::pair<std::pair<int, int>, int>> events;  // (pair, frame)
  if (n >= 2) {
    for (int e = 0; e < cfg.crossings; ++e) {
      const int frame = std::clamp(
          static_cast<int>(std::lround(static_cast<double>(e + 1) * cfg.n_frames /
                                       (cfg.crossings + 1))),
          3, cfg.n_frames - 2);
      int a = (2 * e) % n;
      int b = (2 * e + 1) % n;
      if (a == b) b = (a + 1) % n;
      const Vec2 point{cfg.arena_w * (0.3 + 0.4 * unit(rng)),
                       cfg.arena_h * (0.3 + 0.4 * unit(rng))};
      const double theta = kTau * unit(rng);
      const double delta = std::numbers::pi * (1.0 / 6.0 + unit(rng) * 2.0 / 3.0);
      const double speed_lo = cfg.speed_min;
      const double span = cfg.speed_max - cfg.speed_min;
      meetings[a].push_back({frame, point, speed_lo + span * unit(rng), theta});
      meetings[b].push_back({frame, point, speed_lo + span * unit(rng), theta + delta});
      events.push_back({{std::min(a, b), std::max(a, b)}, frame});
    }
  }

  // Ideal (unfolded) trajectories.
  std::vector<std::vector<Vec2>> ideal(n, std::vector<Vec2>(cfg.n_frames + 1));
  for (int t = 0; t < n; ++t) {
    auto& ms = meetings[t];
    std::sort(ms.begin(), ms.end(), [](const Meeting& x, const Meeting& y) {
      return x.frame < y.frame;
    });
    if (ms.empty()) {
      Vec2 pos{cfg.arena_w * (0.1 + 0.8 * unit(rng)), cfg.arena_h * (0.1 + 0.8 * unit(rng))};
      double angle = kTau * unit(rng);
      double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);
      for (int f = 1; f <= cfg.n_frames; ++f) {
        ideal[t][f] = pos;
        if (unit(rng) < cfg.dir_change_prob) {
          angle = kTau * unit(rng);
          speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);
        }
        pos = pos + Vec2{speed * std::cos(angle), speed * std::sin(angle)};
      }
    } else {
      // Straight segments through the meeting constraints; the approach
      // velocity extends before the first and after the last meeting.
      for (int f = 1; f <= cfg.n_frames; ++f) {
        const Meeting* prev = nullptr;
        const Meeting* next = nullptr;
        for (const Meeting& m : ms) {
          if (m.frame <= f) prev = &m;
          if (m.frame >= f && !next) next = &m;
        }
        if (prev && next && prev != next) {
          const double alpha =
              static_cast<double>(f - prev->frame) / (next->frame - prev->frame);
          ideal[t][f] = prev->point + (next->point - prev->point) * alpha;
        } else {
          const Meeting& anchor = prev ? *prev : *next;
          const Vec2 v{anchor.speed * std::cos(anchor.angle),
                       anchor.speed * std::sin(anchor.angle)};
          ideal[t][f] = anchor.point + v * static_cast<double>(f - anchor.frame);
        }
      }
    }
  }

  // Ground truth with reflections applied.
  for (int t = 0; t < n; ++t) {
    Track track;
    track.id = t + 1;
    for (int f = 1; f <= cfg.n_frames; ++f) {
      Detection d;
      d.frame = f;
      d.center = {fold(ideal[t][f].x, 0.0, cfg.arena_w), fold(ideal[t][f].y, 0.0, cfg.arena_h)};
      d.size = sizes[t];
      d.confidence = 1.0;
      d.appearance = base_app[t];
      d.identity = t + 1;
      track.detections.push_back(std::move(d));
    }
    track.interpolated.assign(track.detections.size(), false);
    scene.gt.tracks.push_back(std::move(track));
  }

  // Occlusion dropouts: around each crossing (the later target of the pair
  // passes behind) and occasionally at random.
  std::vector<std::set<int>> dropped(n);
  if (cfg.occlusion_max > 0) {
    for (const auto& [pair, frame] : events) {
      const int victim = pair.second;
      const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.occlusion_max));
      for (int f = frame - len / 2; f < frame - len / 2 + len; ++f) {
        if (f >= 1 && f <= cfg.n_frames) dropped[victim].insert(f);
      }
    }
    for (int t = 0; t < n; ++t) {
      for (int f = 1; f <= cfg.n_frames; ++f) {
        if (unit(rng) < 0.5 / cfg.n_frames) {
          const int len =
              1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.occlusion_max));
          for (int g = f; g < f + len && g <= cfg.n_frames; ++g) dropped[t].insert(g);
        }
      }
    }
  }

  // Noisy detections and false positives, frame order.
  for (int f = 1; f <= cfg.n_frames; ++f) {
    for (int t = 0; t < n; ++t) {
      if (dropped[t].count(f)) continue;
      if (cfg.miss_rate > 0.0 && unit(rng) < cfg.miss_rate) continue;
      const Detection& gt_d = scene.gt.tracks[t].detections[f - 1];
      Detection d;
      d.frame = f;
      d.center = gt_d.center;
      if (cfg.pos_noise > 0.0) {
        d.center.x += cfg.pos_noise * gauss(rng);
        d.center.y += cfg.pos_noise * gauss(rng);
      }
      d.size = gt_d.size;
      // A noiseless detector reports full confidence.
      d.confidence =
          cfg.pos_noise > 0.0 ? std::clamp(0.8 + 0.1 * gauss(rng), 0.05, 1.0) : 1.0;
      if (cfg.app_noise > 0.0) {
        std::vector<double> app = base_app[t];
        double n2 = 0.0;
        for (double& x : app) {
          x += cfg.app_noise * gauss(rng);
          n2 += x * x;
        }
        const double nn = std::sqrt(n2);
        if (nn > 0.0) {
          for (double& x : app) x /= nn;
        }
        d.appearance = std::move(app);
      } else {
        d.appearance = base_app[t];
      }
      d.identity = t + 1;
      scene.detections.push_back(std::move(d));
    }
    if (cfg.fp_rate > 0.0 && unit(rng) < cfg.fp_rate) {
      Detection d;
      d.frame = f;
      d.center = {cfg.arena_w * unit(rng), cfg.arena_h * unit(rng)};
      d.size = {24.0 + 16.0 * unit(rng), 48.0 + 32.0 * unit(rng)};
      d.confidence = std::clamp(0.4 + 0.15 * gauss(rng), 0.05, 1.0);
      d.appearance = random_unit_vector(rng, cfg.d_a);
      scene.detections.push_back(std::move(d));
    }
  }

  // Verification pass: count maximal per-pair frame runs with overlapping
  // ground-truth boxes.
  int runs = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      bool in_run = false;
      for (int f = 1; f <= cfg.n_frames; ++f) {
        const bool overlap = iou(scene.gt.tracks[a].detections[f - 1],
                                 scene.gt.tracks[b].detections[f - 1]) > 0.0;
        if (overlap && !in_run) ++runs;
        in_run = overlap;
      }
    }
  }
  scene.crossing_intervals = runs;
  return scene;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  validate_scene_config(cfg);
  Scene best;
  int best_runs = -1;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Scene s = generate_once(cfg, attempt);
    if (s.crossing_intervals >= cfg.crossings) return s;
    if (s.crossing_intervals > best_runs) {
      best_runs = s.crossing_intervals;
      best = std::move(s);
    }
  }
  return best;
}

}  // namespace crfmot
