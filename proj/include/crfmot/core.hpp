#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace crfmot {

// Precondition / invariant breach inside the library. Callers violating an
// operation contract get this, not a silent wrong answer.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Bad user-supplied data (files, config values, boxes).
class MalformedInput : public std::runtime_error {
 public:
  explicit MalformedInput(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss, diverging optimizer, and friends.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

// Exhaustive minimizer asked for an instance above its hard cap.
class SizeLimitError : public std::runtime_error {
 public:
  explicit SizeLimitError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline Vec2 operator*(double s, Vec2 a) { return a * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Cosine similarity; 0 for empty, mismatched, or zero-norm inputs.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

constexpr int kNoIdentity = -1;

// One bounding-box observation in one frame. Positions are box centers in
// pixels; frames are 1-based following the MOTChallenge convention.
struct Detection {
  int frame = 1;
  Vec2 center;
  Vec2 size;                       // width, height; strictly positive
  double confidence = 1.0;         // in [0, 1]
  std::vector<double> appearance;  // empty = absent; unit norm otherwise
  int identity = kNoIdentity;      // ground truth only
  bool interpolated = false;       // set for gap-filled boxes
};

// Raw left/top/width/height box, the on-disk representation.
struct BoxCorner {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
};

// Throws MalformedInput on nonpositive width/height.
Detection box_to_center(int frame, const BoxCorner& box, double confidence = 1.0);
BoxCorner center_to_corner(const Detection& d);

// Intersection over union of the two boxes (0 when disjoint).
double iou(const Detection& a, const Detection& b);

void validate_detection(const Detection& d);

// A run of detections in consecutive frames with endpoint velocity estimates
// and one representative appearance descriptor.
struct Tracklet {
  int id = 0;
  std::vector<Detection> detections;
  Vec2 head_velocity;
  Vec2 tail_velocity;
  std::vector<double> appearance;

  bool empty() const { return detections.empty(); }
  int length() const { return static_cast<int>(detections.size()); }
  int start_frame() const { return detections.front().frame; }
  int end_frame() const { return detections.back().frame; }
  const Detection& head() const { return detections.front(); }
  const Detection& tail() const { return detections.back(); }
};

// Throws ContractViolation if frames are not exactly t_s..t_e.
void validate_tracklet(const Tracklet& t);

enum class EdgeKind { Consistency, Repellency };

// Node = one ordered candidate link (T_first -> T_second) with its unary
// label probabilities (z0, z1) = P(no link), P(link).
struct CrfNode {
  int index = 0;
  int first = 0;   // tracklet index of T_i1
  int second = 0;  // tracklet index of T_i2
  std::array<double, 2> unary_prob{0.5, 0.5};
};

// Enforces the strict gap rule 0 < gap < t_thr and the simplex invariant on
// the probabilities. gap = second.start_frame() - first.end_frame().
CrfNode make_crf_node(int index, int first, int second, int gap, int t_thr,
                      std::array<double, 2> unary_prob);

// potential[li][lj] = cost of labeling node i with li and node j with lj.
using PotentialTable = std::array<std::array<double, 2>, 2>;

struct CrfEdge {
  int i = 0;
  int j = 0;
  EdgeKind kind = EdgeKind::Consistency;
  std::array<double, 2> joint_prob{0.5, 0.5};  // (z_{i:1}, z_{j:1}) in pair context
  PotentialTable potential{};
};

struct CrfGraph {
  std::vector<CrfNode> nodes;
  std::vector<CrfEdge> edges;
  std::vector<std::vector<int>> adjacency;  // node -> incident edge indices

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  void rebuild_adjacency();
  // Throws ContractViolation when the adjacency is inconsistent with the
  // edge list or an edge is degenerate/duplicated.
  void validate() const;
};

// Per-node probability pair (q_{i:0}, q_{i:1}) on the unit simplex.
struct RelaxedLabeling {
  std::vector<std::array<double, 2>> q;

  int size() const { return static_cast<int>(q.size()); }
};

enum class Projection { kSoftmax, kClipRenorm };

struct CrfParams {
  double w_u = 1.0;
  double w_d = 1.0;
  double gamma = 0.5;
  double epsilon = 1e-6;
  int iterations = 5;
  int t_thr_round1 = 20;
  int t_thr_round2 = 50;
  int window_size = 200;
  double window_overlap = 0.5;
  Projection projection = Projection::kSoftmax;
};

void validate_params(const CrfParams& p);

}  // namespace crfmot
