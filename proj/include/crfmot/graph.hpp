#pragma once

#include <iosfwd>

#include "crfmot/potentials.hpp"

namespace crfmot {

// Spatio-temporal closeness thresholds for difficult node pairs.
struct DifficultPairConfig {
  // Endpoint proximity radius in pixels. A nonpositive value selects the
  // adaptive rule: twice the mean box width of the two tracklets compared.
  double tau_close = 0.0;
  int delta_t = 10;  // max endpoint frame distance
};

// One node per ordered linkable pair (0 < gap < t_thr), probabilities from
// the provider, sorted by (second start, first end, ids) for deterministic
// windowing.
std::vector<CrfNode> build_nodes(const std::vector<Tracklet>& tracklets, int t_thr,
                                 const UnaryProvider& provider);

// Difficult node pairs: Repellency for pairs sharing a tracklet on the same
// side, Consistency for tail-close/head-close pairs. Repellency wins when a
// pair qualifies for both. joint_prob/potential are left for the caller.
std::vector<CrfEdge> find_difficult_pairs(const std::vector<CrfNode>& nodes,
                                          const std::vector<Tracklet>& tracklets,
                                          const DifficultPairConfig& cfg);

// Full graph build: nodes, edges, provider probabilities, potential tables.
CrfGraph build_graph(const std::vector<Tracklet>& tracklets, int t_thr,
                     const ProviderSet& providers, const DifficultPairConfig& cfg,
                     const CrfParams& params, int d_a);

// Recomputes pairwise potential tables from the stored joint probabilities
// (used after a w_d / epsilon change; probabilities stay as built).
void set_edge_potentials(CrfGraph& g, const CrfParams& params);

// Node range [begin, end) with every edge whose endpoints both fall inside,
// reindexed from 0.
CrfGraph subgraph(const CrfGraph& g, int begin, int end);

// Debug dump for inspection: one CSV block per section.
void dump_graph_csv(const CrfGraph& g, std::ostream& nodes_os, std::ostream& edges_os);

}  // namespace crfmot
