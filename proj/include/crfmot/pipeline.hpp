#pragma once

#include <random>

#include "crfmot/metrics.hpp"
#include "crfmot/mot_io.hpp"
#include "crfmot/run_config.hpp"

namespace crfmot {

// ---------------------------------------------------------------------------
// Synthetic CRF instances (tests, oracle sweeps, acceptance checks).
// ---------------------------------------------------------------------------

// Instances mirror the tracker's operating regime: a planted feasible
// labeling with provider-style probabilities around it, plus a confusion
// fraction of uninformative nodes that only the pairwise terms can settle.
struct RandomGraphSpec {
  int n = 10;
  double edge_density = 0.2;  // consistency-edge probability per node pair
  double confusion = 0.35;    // fraction of nodes with near-uniform unaries
  bool raw_tables = false;    // independent random pairwise entries instead
  bool unique_ids = false;    // distinct tracklet ids, no repair conflicts
  bool edgeless = false;
};

CrfGraph make_random_graph(const RandomGraphSpec& spec, std::mt19937_64& rng,
                           const CrfParams& params);

// ---------------------------------------------------------------------------
// End-to-end runs shared by the CLI and the test suites.
// ---------------------------------------------------------------------------

struct TrackRunResult {
  std::vector<Tracklet> tracklets;
  TrackSet tracks;
  TwoRoundTrace trace;
};

TrackRunResult run_tracking(const std::vector<Detection>& detections, const RunConfig& cfg,
                            const ProviderSet& providers);

struct OracleCheckRow {
  std::uint64_t seed = 0;
  int nodes = 0;
  int edges = 0;
  double oracle_energy = 0.0;
  double decoded_energy = 0.0;
  double gap = 0.0;  // (decoded - oracle) / max(|oracle|, 1)
  bool agree = false;
};

std::vector<OracleCheckRow> oracle_check(const std::vector<int>& sizes, int seeds_per_size,
                                         std::uint64_t base_seed, const CrfParams& params);
std::string oracle_check_csv(const std::vector<OracleCheckRow>& rows);

// Builds training windows from simulated scenes (identity-labeled) with the
// given seeds.
std::vector<TrainingWindow> windows_from_scenes(const RunConfig& cfg,
                                                const std::vector<std::uint64_t>& seeds,
                                                const TrainableModel& model);

struct TrainRunResult {
  TrainableModel model;
  std::vector<TrainLogEntry> log;
};

// Scene generation -> tracklets -> windows -> Adam training.
TrainRunResult run_training(const RunConfig& cfg);

// Sanity checks over a written result file: each id appears at most once per
// frame and covers a gap-free frame range. Throws MalformedInput otherwise.
void validate_result_file(const std::string& path);

// Per-scene unary-vs-crf comparison.
struct AblationRow {
  std::uint64_t seed = 0;
  MetricsReport unary;
  MetricsReport crf;
};

std::vector<AblationRow> run_ablation(const RunConfig& cfg, int scenes);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace crfmot
