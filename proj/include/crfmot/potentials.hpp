#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>

#include "crfmot/core.hpp"

namespace crfmot {

// Probabilities are clamped to this interval before entering a log; the
// epsilon guard alone keeps potentials finite, clamping also bounds them.
constexpr double kProbClampLo = 1e-6;
constexpr double kProbClampHi = 1.0 - 1e-6;

inline double clamp_prob(double z) {
  return z < kProbClampLo ? kProbClampLo : (z > kProbClampHi ? kProbClampHi : z);
}

// Linear-motion residuals between two tracklets (pixels).
struct MotionFeature {
  Vec2 dp1;  // forward prediction of T_k vs. observed start of T_m
  Vec2 dp2;  // backward prediction of T_m vs. observed end of T_k
};

// Residuals for T_k -> T_m with gap g = t_m^s - t_k^e:
//   dp1 = p_k(t_k^e) + v_k^tail * g - p_m(t_m^s)
//   dp2 = p_m(t_m^s) - v_m^head * g - p_k(t_k^e)
// Throws ContractViolation when the gap is not positive.
MotionFeature motion_feature_pair(const Tracklet& t_k, const Tracklet& t_m);

// Center at an arbitrary frame: the observed center when the frame lies
// inside the tracklet, otherwise extrapolation from the nearest endpoint.
Vec2 center_at_frame(const Tracklet& t, int frame);

// Relative-geometry residual for a difficult node pair, evaluated at
// t_x = min(t_i1^e, t_j1^e).
MotionFeature motion_feature_nodepair(const Tracklet& i1, const Tracklet& i2,
                                      const Tracklet& j1, const Tracklet& j2);

// Concatenated appearance + motion description of a node pair, fixed width
// 4*d_a + 20. Cross pairings with a nonpositive gap contribute a sentinel
// block instead of a motion residual.
struct NodePairFeature {
  std::vector<double> f;
  int d_a = 0;

  int dim() const { return static_cast<int>(f.size()); }
};

inline int node_pair_feature_dim(int d_a) { return 4 * d_a + 20; }

constexpr double kMotionSentinel = 1e4;  // px, marks invalid cross pairings

NodePairFeature node_pair_feature(const CrfNode& vi, const CrfNode& vj,
                                  const std::vector<Tracklet>& tracklets, int d_a,
                                  double sentinel = kMotionSentinel);

// Inputs of the default logistic unary model.
struct UnaryFeature {
  double app_cos = 0.0;     // cosine of the two representative descriptors
  double dp1_scaled = 0.0;  // |dp1| / mean endpoint box diagonal
  double dp2_scaled = 0.0;
  double gap_frac = 0.0;    // gap / T_thr
};

UnaryFeature unary_feature(const Tracklet& a, const Tracklet& b, int t_thr);

// Stable identification of nodes in file-backed probability tables.
struct NodeKey {
  int first_id = 0;   // tracklet id of T_i1
  int second_id = 0;  // tracklet id of T_i2
};

std::string node_key_string(const NodeKey& k);
std::string edge_key_string(const NodeKey& ki, const NodeKey& kj);

// ---------------------------------------------------------------------------
// Probability providers. These stand in for the learned matching networks:
// anything that deterministically maps a candidate link (or a difficult node
// pair) to label probabilities can be plugged in.
// ---------------------------------------------------------------------------

class UnaryProvider {
 public:
  virtual ~UnaryProvider() = default;
  // Returns (z0, z1), z0 + z1 = 1.
  virtual std::array<double, 2> unary_prob(const UnaryFeature& f, const NodeKey& key) const = 0;
  virtual void save(std::ostream& os) const = 0;
};

class PairwiseProvider {
 public:
  virtual ~PairwiseProvider() = default;
  // Returns (z_{i:1}, z_{j:1}) conditioned on the pair context.
  virtual std::array<double, 2> joint_prob(EdgeKind kind, const NodePairFeature& f,
                                           const NodeKey& ki, const NodeKey& kj) const = 0;
  virtual void save(std::ostream& os) const = 0;
};

// Derived statistics the logistic pairwise model reads off the raw feature:
// four appearance cosines followed by the ten scaled motion-residual norms,
// in the feature's block order.
constexpr int kPairwiseInputDim = 14;
std::array<double, kPairwiseInputDim> pairwise_inputs(const NodePairFeature& f,
                                                      double pos_scale);

class LogisticUnaryProvider : public UnaryProvider {
 public:
  // weights over [app_cos, dp1_scaled, dp2_scaled, gap_frac], then bias
  std::array<double, 5> w{};

  static LogisticUnaryProvider defaults();

  std::array<double, 2> unary_prob(const UnaryFeature& f, const NodeKey& key) const override;
  void save(std::ostream& os) const override;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);
};

class LogisticPairwiseProvider : public PairwiseProvider {
 public:
  // One weight row per (edge kind, head): kPairwiseInputDim weights + bias.
  // Row order: consistency head_i, consistency head_j, repellency head_i,
  // repellency head_j.
  static constexpr int kRows = 4;
  static constexpr int kRowDim = kPairwiseInputDim + 1;
  std::array<std::array<double, kRowDim>, kRows> w{};
  double pos_scale = 100.0;  // px, normalizes motion norms before the logistic
  int d_a = 16;

  static LogisticPairwiseProvider defaults(int d_a = 16);

  std::array<double, 2> joint_prob(EdgeKind kind, const NodePairFeature& f,
                                   const NodeKey& ki, const NodeKey& kj) const override;
  void save(std::ostream& os) const override;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);
};

// Replays stored probabilities exactly; lookups are by node/edge key and a
// missing key is an error.
class TableUnaryProvider : public UnaryProvider {
 public:
  std::array<double, 2> unary_prob(const UnaryFeature& f, const NodeKey& key) const override;
  void save(std::ostream& os) const override;
  void set(const NodeKey& key, std::array<double, 2> z);

 private:
  std::map<std::string, std::array<double, 2>> table_;
  friend class ProviderIo;
};

class TablePairwiseProvider : public PairwiseProvider {
 public:
  std::array<double, 2> joint_prob(EdgeKind kind, const NodePairFeature& f,
                                   const NodeKey& ki, const NodeKey& kj) const override;
  void save(std::ostream& os) const override;
  void set(const NodeKey& ki, const NodeKey& kj, std::array<double, 2> z);

 private:
  std::map<std::string, std::array<double, 2>> table_;
  friend class ProviderIo;
};

// Bundle used by graph construction and the association pipeline. Providers
// are read-only once inference starts.
struct ProviderSet {
  std::shared_ptr<const UnaryProvider> unary;
  std::shared_ptr<const PairwiseProvider> pairwise;

  static ProviderSet defaults(int d_a = 16);
};

std::shared_ptr<UnaryProvider> load_unary_provider(const std::string& path);
std::shared_ptr<PairwiseProvider> load_pairwise_provider(const std::string& path);
void save_provider_file(const std::string& path, const UnaryProvider& p);
void save_provider_file(const std::string& path, const PairwiseProvider& p);

// ---------------------------------------------------------------------------
// Potential formulas.
// ---------------------------------------------------------------------------

// -w_u * ln(z + eps)
double unary_potential(double z, double w_u, double eps);

// Table over both labelings: entry (li, lj) = -w_d * ln(z_{i:li} * z_{j:lj} + eps)
// with z_{.:1} as given and z_{.:0} the complement.
PotentialTable pairwise_potential(double z_i, double z_j, double w_d, double eps);

// Provider output for one candidate link. Logistic providers return
// (1 - s, s) summing to 1 exactly; table providers pass stored values
// through unchanged.
std::array<double, 2> unary_probability(const Tracklet& a, const Tracklet& b, int t_thr,
                                        const UnaryProvider& provider);

}  // namespace crfmot
