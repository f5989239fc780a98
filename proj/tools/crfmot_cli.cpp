#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crfmot/pipeline.hpp"

namespace fs = std::filesystem;
using namespace crfmot;

namespace {

// All output files land via temp + rename so failures leave nothing partial.
void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw MalformedInput("cannot write " + tmp);
    os << content;
  }
  fs::rename(tmp, path);
}

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value configuration file");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set seed=7")
      ->take_all();
}

// Config problems are usage errors (exit 1), unlike data-file problems.
RunConfig resolve_config(const ConfigArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = parse_run_config(args.config_path);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw MalformedInput("--set expects key=value, got " + kv);
    apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string energy_trace_csv(const std::vector<double>& energies) {
  std::ostringstream os;
  os << "iteration,energy\n";
  for (size_t i = 0; i < energies.size(); ++i) os << i << "," << energies[i] << "\n";
  return os.str();
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Scene scene = generate_scene(cfg.scene);
  write_mot_tracks(out_dir + "/gt.txt", scene.gt, MotRole::kGroundTruth);
  write_mot_detections(out_dir + "/det.txt", scene.detections);
  write_text_atomic(out_dir + "/config.txt", serialize_run_config(cfg));
  std::cout << "wrote " << out_dir << "/gt.txt and det.txt (" << scene.detections.size()
            << " detections, " << scene.crossing_intervals << " crossing intervals)\n";
  return 0;
}

int cmd_track(const RunConfig& cfg, const std::string& det_path, const std::string& out_path,
              const std::string& trace_dir) {
  const std::vector<Detection> dets = read_mot_detections(det_path);
  const ProviderSet providers = make_providers(cfg);
  const TrackRunResult result = run_tracking(dets, cfg, providers);
  write_mot_tracks(out_path, result.tracks, MotRole::kResults);
  validate_result_file(out_path);
  if (!trace_dir.empty()) {
    fs::create_directories(trace_dir);
    for (const auto& [name, energies] : result.trace.energy_traces) {
      write_text_atomic(trace_dir + "/" + name + ".csv", energy_trace_csv(energies));
    }
  }
  std::cout << "tracked " << dets.size() << " detections -> " << result.tracks.tracks.size()
            << " tracks (" << out_path << ")\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& gt_path, const std::string& result_path,
             const std::string& csv_path) {
  TrackSet gt = read_mot_tracks(gt_path, MotRole::kGroundTruth, cfg.min_visibility);
  TrackSet result = read_mot_tracks(result_path, MotRole::kResults);
  const auto [g0, g1] = frame_range(gt);
  const auto [r0, r1] = frame_range(result);
  if (g1 >= g0 && r1 >= r0 && (g0 != r0 || g1 != r1)) {
    const int first = std::max(g0, r0), last = std::min(g1, r1);
    std::cerr << "warning: frame ranges differ (gt " << g0 << ".." << g1 << ", result " << r0
              << ".." << r1 << "); clamping to " << first << ".." << last << "\n";
    gt = clip_frames(gt, first, last);
    result = clip_frames(result, first, last);
  }
  const MetricsReport rep = evaluate(gt, result, cfg.iou_threshold);
  std::cout << format_report(rep);
  if (!csv_path.empty()) {
    write_text_atomic(csv_path, report_csv_header() + "\n" + report_csv(rep) + "\n");
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  if (cfg.train_scenes < 1) throw CLI::ValidationError("train", "train_scenes must be >= 1");
  fs::create_directories(out_dir);
  const TrainRunResult result = run_training(cfg);

  std::ostringstream params;
  params << "w_u=" << result.model.params.w_u << "\n"
         << "w_d=" << result.model.params.w_d << "\n"
         << "gamma=" << result.model.params.gamma << "\n"
         << "iterations=" << result.model.params.iterations << "\n";
  write_text_atomic(out_dir + "/params.txt", params.str());

  std::ostringstream unary;
  result.model.unary.save(unary);
  write_text_atomic(out_dir + "/unary_provider.txt", unary.str());
  std::ostringstream pairwise;
  result.model.pairwise.save(pairwise);
  write_text_atomic(out_dir + "/pairwise_provider.txt", pairwise.str());

  std::ostringstream log;
  log << "epoch,train_loss,val_loss\n";
  for (const TrainLogEntry& e : result.log) {
    log << e.epoch << "," << e.train_loss << "," << e.val_loss << "\n";
  }
  write_text_atomic(out_dir + "/training_log.csv", log.str());

  std::cout << "trained " << result.log.size() - 1 << " epochs; final val loss "
            << result.log.back().val_loss << "; wrote " << out_dir << "/params.txt\n";
  return 0;
}

int cmd_oracle_check(const RunConfig& cfg, const std::string& sizes_arg, int seeds,
                     const std::string& out_path) {
  std::vector<int> sizes;
  std::stringstream ss(sizes_arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
  if (sizes.empty()) throw CLI::ValidationError("oracle-check", "no sizes given");

  const auto rows = oracle_check(sizes, seeds, cfg.scene.seed, cfg.params);
  if (!out_path.empty()) write_text_atomic(out_path, oracle_check_csv(rows));

  int agree = 0;
  double gap = 0.0;
  for (const auto& r : rows) {
    agree += r.agree ? 1 : 0;
    gap += r.gap;
  }
  std::cout << rows.size() << " instances, agreement " << agree << "/" << rows.size()
            << ", mean relative energy gap " << gap / std::max<size_t>(1, rows.size()) << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg, int scenes) {
  const auto rows = run_ablation(cfg, scenes);
  std::cout << ablation_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRF tracklet-association tracker"};
  app.require_subcommand(1);

  ConfigArgs cfg_args;
  std::string out_dir = "out";
  std::string det_path, out_path = "results.txt", trace_dir;
  std::string gt_path, result_path, csv_path;
  std::string mode_flag, sizes_arg = "2,4,6,8,10,12";
  int seeds = 10, scenes = 5;
  double lr_flag = -1.0;
  int jobs_flag = -1;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene (gt + detections)");
  add_config_options(synth, cfg_args);
  synth->add_option("--out", out_dir, "output directory")->required();

  CLI::App* track = app.add_subcommand("track", "run the association pipeline on detections");
  add_config_options(track, cfg_args);
  track->add_option("--det", det_path, "MOT detection file")->required();
  track->add_option("--out", out_path, "result file");
  track->add_option("--traces", trace_dir, "directory for energy trace CSVs");
  track->add_option("--mode", mode_flag, "crf | unary");
  track->add_option("--jobs", jobs_flag, "worker thread bound");

  CLI::App* eval = app.add_subcommand("eval", "CLEAR-MOT / IDF1 metrics");
  add_config_options(eval, cfg_args);
  eval->add_option("--gt", gt_path, "ground-truth file")->required();
  eval->add_option("--result", result_path, "result file")->required();
  eval->add_option("--csv", csv_path, "also write the report as CSV");

  CLI::App* train_cmd = app.add_subcommand("train", "fit CRF parameters and providers");
  add_config_options(train_cmd, cfg_args);
  train_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  train_cmd->add_option("--lr", lr_flag, "learning rate override");

  CLI::App* oracle = app.add_subcommand("oracle-check", "compare decoding to brute force");
  add_config_options(oracle, cfg_args);
  oracle->add_option("--sizes", sizes_arg, "comma-separated node counts");
  oracle->add_option("--seeds", seeds, "instances per size");
  oracle->add_option("--out", out_path, "per-instance CSV path");

  CLI::App* ablate = app.add_subcommand("ablate", "compare unary and crf modes on scenes");
  add_config_options(ablate, cfg_args);
  ablate->add_option("--scenes", scenes, "number of scenes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 1 : 0;
  }

  RunConfig cfg;
  try {
    cfg = resolve_config(cfg_args);
    if (!mode_flag.empty()) cfg.mode = mode_flag;
    if (lr_flag >= 0.0) cfg.schedule.learning_rate = lr_flag;
    if (jobs_flag >= 0) cfg.jobs = jobs_flag;
    parse_mode(cfg.mode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg, out_dir);
    if (track->parsed()) return cmd_track(cfg, det_path, out_path, trace_dir);
    if (eval->parsed()) return cmd_eval(cfg, gt_path, result_path, csv_path);
    if (train_cmd->parsed()) return cmd_train(cfg, out_dir);
    if (oracle->parsed()) return cmd_oracle_check(cfg, sizes_arg, seeds, out_path);
    if (ablate->parsed()) return cmd_ablate(cfg, scenes);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MalformedInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
