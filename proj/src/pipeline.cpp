#include "crfmot/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace crfmot {

CrfGraph make_random_graph(const RandomGraphSpec& spec, std::mt19937_64& rng,
                           const CrfParams& params) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CrfGraph g;
  const int pool = std::max(2, (spec.n * 2) / 3);
  std::set<int> used_first, used_second;
  std::vector<int> planted(spec.n, 0);
  std::vector<char> confused(spec.n, 0);
  for (int i = 0; i < spec.n; ++i) {
    CrfNode node;
    node.index = i;
    if (spec.unique_ids) {
      node.first = 2 * i;
      node.second = 2 * i + 1;
    } else {
      node.first = static_cast<int>(rng() % pool);
      node.second = pool + static_cast<int>(rng() % pool);
    }
    // Plant a feasible labeling and draw provider-style probabilities
    // around it.
    const bool free_slot =
        !used_first.count(node.first) && !used_second.count(node.second);
    if (free_slot && unit(rng) < 0.7) {
      planted[i] = 1;
      used_first.insert(node.first);
      used_second.insert(node.second);
    }
    confused[i] = unit(rng) < spec.confusion;
    double z1;
    if (confused[i]) {
      z1 = 0.35 + 0.3 * unit(rng);
    } else if (planted[i]) {
      z1 = 0.6 + 0.35 * unit(rng);
    } else {
      z1 = 0.05 + 0.35 * unit(rng);
    }
    node.unary_prob = {1.0 - z1, z1};
    g.nodes.push_back(node);
  }
  if (!spec.edgeless) {
    auto joint_z = [&](int node_idx) {
      if (unit(rng) < spec.confusion * 0.5) return 0.35 + 0.3 * unit(rng);
      return planted[node_idx] ? 0.55 + 0.4 * unit(rng) : 0.05 + 0.4 * unit(rng);
    };
    for (int i = 0; i < spec.n; ++i) {
      for (int j = i + 1; j < spec.n; ++j) {
        const bool shared = g.nodes[i].first == g.nodes[j].first ||
                            g.nodes[i].second == g.nodes[j].second;
        CrfEdge e;
        e.i = i;
        e.j = j;
        if (shared) {
          if (unit(rng) > 0.8) continue;
          e.kind = EdgeKind::Repellency;
        } else {
          if (unit(rng) > spec.edge_density) continue;
          e.kind = EdgeKind::Consistency;
        }
        e.joint_prob = {joint_z(i), joint_z(j)};
        if (spec.raw_tables) {
          for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) e.potential[a][b] = 3.0 * unit(rng);
          }
        } else {
          e.potential = pairwise_potential(clamp_prob(e.joint_prob[0]),
                                           clamp_prob(e.joint_prob[1]), params.w_d,
                                           params.epsilon);
        }
        g.edges.push_back(e);
      }
    }
  }
  g.rebuild_adjacency();
  return g;
}

TrackRunResult run_tracking(const std::vector<Detection>& detections, const RunConfig& cfg,
                            const ProviderSet& providers) {
  TrackRunResult out;
  out.tracklets = link_detections(group_by_frame(detections), cfg.link);
  out.tracks = two_round(out.tracklets, cfg.params, providers, cfg.difficult, cfg.d_a,
                         parse_mode(cfg.mode), cfg.link.velocity_window, cfg.jobs, &out.trace);
  return out;
}

std::vector<OracleCheckRow> oracle_check(const std::vector<int>& sizes, int seeds_per_size,
                                         std::uint64_t base_seed, const CrfParams& params) {
  std::vector<OracleCheckRow> rows;
  for (int n : sizes) {
    for (int s = 0; s < seeds_per_size; ++s) {
      const std::uint64_t seed = base_seed + 1000003ULL * n + s;
      std::mt19937_64 rng(seed);
      RandomGraphSpec spec;
      spec.n = n;
      const CrfGraph g = make_random_graph(spec, rng, params);
      const InferenceTrace trace = infer(g, params);
      const std::vector<int> labels = decode(trace.final_q, g);
      const double decoded = energy_integer(g, labels, params);
      const BruteForceResult oracle = brute_force_minimize(g, params);
      OracleCheckRow row;
      row.seed = seed;
      row.nodes = n;
      row.edges = g.num_edges();
      row.oracle_energy = oracle.energy;
      row.decoded_energy = decoded;
      row.gap = (decoded - oracle.energy) / std::max(std::abs(oracle.energy), 1.0);
      row.agree = std::abs(decoded - oracle.energy) <=
                  1e-9 * std::max(1.0, std::abs(oracle.energy));
      rows.push_back(row);
    }
  }
  return rows;
}

std::string oracle_check_csv(const std::vector<OracleCheckRow>& rows) {
  std::ostringstream os;
  os << "seed,nodes,edges,oracle_energy,decoded_energy,gap,agree\n";
  for (const OracleCheckRow& r : rows) {
    os << r.seed << "," << r.nodes << "," << r.edges << "," << r.oracle_energy << ","
       << r.decoded_energy << "," << r.gap << "," << (r.agree ? 1 : 0) << "\n";
  }
  return os.str();
}

std::vector<TrainingWindow> windows_from_scenes(const RunConfig& cfg,
                                                const std::vector<std::uint64_t>& seeds,
                                                const TrainableModel& model) {
  std::vector<TrainingWindow> windows;
  for (std::uint64_t seed : seeds) {
    SceneConfig sc = cfg.scene;
    sc.seed = seed;
    const Scene scene = generate_scene(sc);
    const std::vector<Tracklet> tracklets =
        link_detections(group_by_frame(scene.detections), cfg.link);
    auto scene_windows = make_training_windows(tracklets, cfg.params.t_thr_round1, model,
                                               cfg.difficult, cfg.d_a);
    for (auto& w : scene_windows) windows.push_back(std::move(w));
  }
  return windows;
}

TrainRunResult run_training(const RunConfig& cfg) {
  TrainableModel init = TrainableModel::defaults(cfg.d_a);
  init.params = cfg.params;

  std::vector<std::uint64_t> train_seeds, val_seeds;
  for (int s = 0; s < cfg.train_scenes; ++s) train_seeds.push_back(cfg.scene.seed + s);
  for (int s = 0; s < cfg.val_scenes; ++s) {
    val_seeds.push_back(cfg.scene.seed + cfg.train_scenes + s);
  }
  const auto train_windows = windows_from_scenes(cfg, train_seeds, init);
  const auto val_windows = windows_from_scenes(cfg, val_seeds, init);
  if (train_windows.empty()) throw MalformedInput("no training windows were produced");

  const TrainResult res = train(train_windows, val_windows, init, cfg.schedule);
  return {res.model, res.log};
}

void validate_result_file(const std::string& path) {
  const TrackSet ts = read_mot_tracks(path, MotRole::kResults);
  std::map<int, std::set<int>> frames_of_id;
  for (const Track& t : ts.tracks) {
    auto& frames = frames_of_id[t.id];
    for (const Detection& d : t.detections) {
      if (!frames.insert(d.frame).second) {
        throw MalformedInput(path + ": id " + std::to_string(t.id) + " duplicated in frame " +
                             std::to_string(d.frame));
      }
    }
  }
  for (const auto& [id, frames] : frames_of_id) {
    if (frames.empty()) continue;
    if (*frames.rbegin() - *frames.begin() + 1 != static_cast<int>(frames.size())) {
      throw MalformedInput(path + ": id " + std::to_string(id) + " has frame gaps");
    }
  }
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, int scenes) {
  std::vector<AblationRow> rows;
  const ProviderSet providers = make_providers(cfg);
  for (int s = 0; s < scenes; ++s) {
    SceneConfig sc = cfg.scene;
    sc.seed = cfg.scene.seed + s;
    const Scene scene = generate_scene(sc);

    AblationRow row;
    row.seed = sc.seed;
    for (const std::string mode : {"unary", "crf"}) {
      RunConfig run_cfg = cfg;
      run_cfg.mode = mode;
      const TrackRunResult result = run_tracking(scene.detections, run_cfg, providers);
      const auto [gt_first, gt_last] = frame_range(scene.gt);
      const MetricsReport rep =
          evaluate(scene.gt, clip_frames(result.tracks, gt_first, gt_last),
                   cfg.iou_threshold);
      if (mode == "unary") {
        row.unary = rep;
      } else {
        row.crf = rep;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::setw(12) << "seed" << std::setw(12) << "mota_unary" << std::setw(12) << "mota_crf"
     << std::setw(10) << "ids_unary" << std::setw(10) << "ids_crf" << std::setw(12)
     << "idf1_unary" << std::setw(12) << "idf1_crf" << "\n";
  double mu = 0.0, mc = 0.0;
  int iu = 0, ic = 0;
  for (const AblationRow& r : rows) {
    os << std::setw(12) << r.seed << std::setw(12) << r.unary.mota << std::setw(12)
       << r.crf.mota << std::setw(10) << r.unary.ids << std::setw(10) << r.crf.ids
       << std::setw(12) << r.unary.idf1 << std::setw(12) << r.crf.idf1 << "\n";
    mu += r.unary.mota;
    mc += r.crf.mota;
    iu += r.unary.ids;
    ic += r.crf.ids;
  }
  if (!rows.empty()) {
    os << std::setw(12) << "mean" << std::setw(12) << mu / rows.size() << std::setw(12)
       << mc / rows.size() << std::setw(10)
       << static_cast<double>(iu) / static_cast<double>(rows.size()) << std::setw(10)
       << static_cast<double>(ic) / static_cast<double>(rows.size()) << "\n";
  }
  return os.str();
}

}  // namespace crfmot
