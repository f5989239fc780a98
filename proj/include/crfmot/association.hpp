#pragma once

#include "crfmot/assignment.hpp"
#include "crfmot/graph.hpp"
#include "crfmot/inference.hpp"

namespace crfmot {

// A stitched trajectory. Gap frames are filled by interpolate(); the
// per-detection flags mark those boxes (they carry confidence 0).
struct Track {
  int id = 0;
  std::vector<Detection> detections;
  std::vector<bool> interpolated;
};

struct TrackSet {
  std::vector<Track> tracks;
};

// Consecutive [begin, end) index windows of at most window_size nodes,
// advancing by ceil(window_size * (1 - overlap)); the final window ends at
// node_count and may be smaller.
std::vector<std::pair<int, int>> sliding_windows(int node_count, int window_size,
                                                 double overlap);

enum class AssociationMode { kUnary, kCrf };

struct AssociationResult {
  CrfGraph graph;             // global graph over all nodes
  std::vector<int> labels;    // final per-node labels
  std::vector<double> label_confidence;            // q_{i:1} from the owning window
  std::vector<std::pair<int, int>> windows;        // node index ranges
  std::vector<std::vector<double>> window_energies;  // per window, length T+1
};

// Windowed CRF inference: per window infer + decode, labels finalized by the
// first window whose trailing overlap does not contain the node, then one
// global repair pass enforcing <=1 successor and <=1 predecessor per
// tracklet. jobs <= 0 uses the available hardware parallelism.
AssociationResult associate_crf(const std::vector<Tracklet>& tracklets, int t_thr,
                                const CrfParams& params, const ProviderSet& providers,
                                const DifficultPairConfig& cfg, int d_a, int jobs = 0);

// Unary-only baseline: one bipartite problem (predecessors x successors) with
// cost -ln(z_{i:1} + eps) per candidate node, solved by the Hungarian
// algorithm with no-assignment cost -ln(0.5).
AssociationResult associate_unary(const std::vector<Tracklet>& tracklets, int t_thr,
                                  const CrfParams& params, const UnaryProvider& provider);

// True when no tracklet is used twice on the same side.
bool labels_satisfy_matching(const std::vector<CrfNode>& nodes, const std::vector<int>& labels);

// Label-1 links become chains, each chain one track; ids assigned by earliest
// start frame. Throws ContractViolation on branching or cyclic links.
TrackSet stitch(const std::vector<Tracklet>& tracklets, const std::vector<CrfNode>& nodes,
                const std::vector<int>& labels);

// Fills every internal frame gap with linearly interpolated boxes
// (confidence 0, interpolated flag set).
Track interpolate(Track track);

// Converts stitched round-1 tracks back into tracklets for the second
// association round; internal gaps are interpolated so the tracklets are
// contiguous.
std::vector<Tracklet> tracks_to_tracklets(const TrackSet& ts, int velocity_window);

struct TwoRoundTrace {
  std::vector<std::pair<std::string, std::vector<double>>> energy_traces;  // name -> energies
};

// Full association: round 1 at params.t_thr_round1, restitch, round 2 at
// params.t_thr_round2, final interpolation.
TrackSet two_round(const std::vector<Tracklet>& tracklets, const CrfParams& params,
                   const ProviderSet& providers, const DifficultPairConfig& cfg, int d_a,
                   AssociationMode mode, int velocity_window = 5, int jobs = 0,
                   TwoRoundTrace* trace = nullptr);

}  // namespace crfmot
