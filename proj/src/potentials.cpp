#include "crfmot/potentials.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace crfmot {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw MalformedInput("bad number in provider file: '" + s + "'");
  }
  return v;
}

}  // namespace

MotionFeature motion_feature_pair(const Tracklet& t_k, const Tracklet& t_m) {
  const int gap = t_m.start_frame() - t_k.end_frame();
  if (gap <= 0) {
    throw ContractViolation("motion_feature_pair requires a positive gap, got " +
                            std::to_string(gap));
  }
  const double g = gap;
  const Vec2 pk = t_k.tail().center;
  const Vec2 pm = t_m.head().center;
  // Positions are differenced before the velocity terms are added so that a
  // common offset on all centers cancels exactly.
  MotionFeature out;
  out.dp1 = (pk - pm) + t_k.tail_velocity * g;
  out.dp2 = (pm - pk) - t_m.head_velocity * g;
  return out;
}

Vec2 center_at_frame(const Tracklet& t, int frame) {
  if (t.empty()) throw ContractViolation("center_at_frame on empty tracklet");
  if (frame < t.start_frame()) {
    return t.head().center + t.head_velocity * static_cast<double>(frame - t.start_frame());
  }
  if (frame > t.end_frame()) {
    return t.tail().center + t.tail_velocity * static_cast<double>(frame - t.end_frame());
  }
  return t.detections[frame - t.start_frame()].center;
}

namespace {

// Center at a frame split into an observed anchor plus a velocity
// correction, so differences of positions cancel a global offset exactly.
struct AnchoredCenter {
  Vec2 base;
  Vec2 correction;
};

AnchoredCenter anchored_center(const Tracklet& t, int frame) {
  if (frame < t.start_frame()) {
    return {t.head().center, t.head_velocity * static_cast<double>(frame - t.start_frame())};
  }
  if (frame > t.end_frame()) {
    return {t.tail().center, t.tail_velocity * static_cast<double>(frame - t.end_frame())};
  }
  return {t.detections[frame - t.start_frame()].center, {0.0, 0.0}};
}

}  // namespace

MotionFeature motion_feature_nodepair(const Tracklet& i1, const Tracklet& i2,
                                      const Tracklet& j1, const Tracklet& j2) {
  const int t_x = std::min(i1.end_frame(), j1.end_frame());
  // Back-extrapolation p - v*(t_s - t_x) written as p + v*(t_x - t_s).
  const Vec2 corr_i2 = i2.head_velocity * static_cast<double>(t_x - i2.start_frame());
  const Vec2 corr_j2 = j2.head_velocity * static_cast<double>(t_x - j2.start_frame());
  MotionFeature out;
  out.dp1 = (i2.head().center - j2.head().center) + (corr_i2 - corr_j2);
  const AnchoredCenter pi1 = anchored_center(i1, t_x);
  const AnchoredCenter pj1 = anchored_center(j1, t_x);
  out.dp2 = (pi1.base - pj1.base) + (pi1.correction - pj1.correction);
  return out;
}

namespace {

void append_appearance(std::vector<double>& f, const std::vector<double>& app, int d_a) {
  for (int k = 0; k < d_a; ++k) {
    f.push_back(k < static_cast<int>(app.size()) ? app[k] : 0.0);
  }
}

void append_motion(std::vector<double>& f, const Tracklet& a, const Tracklet& b,
                   double sentinel) {
  if (b.start_frame() - a.end_frame() > 0) {
    const MotionFeature m = motion_feature_pair(a, b);
    f.insert(f.end(), {m.dp1.x, m.dp1.y, m.dp2.x, m.dp2.y});
  } else {
    f.insert(f.end(), {sentinel, sentinel, sentinel, sentinel});
  }
}

}  // namespace

NodePairFeature node_pair_feature(const CrfNode& vi, const CrfNode& vj,
                                  const std::vector<Tracklet>& tracklets, int d_a,
                                  double sentinel) {
  const Tracklet& i1 = tracklets[vi.first];
  const Tracklet& i2 = tracklets[vi.second];
  const Tracklet& j1 = tracklets[vj.first];
  const Tracklet& j2 = tracklets[vj.second];

  NodePairFeature out;
  out.d_a = d_a;
  out.f.reserve(node_pair_feature_dim(d_a));
  append_appearance(out.f, i1.appearance, d_a);
  append_appearance(out.f, i2.appearance, d_a);
  append_appearance(out.f, j1.appearance, d_a);
  append_appearance(out.f, j2.appearance, d_a);
  append_motion(out.f, i1, i2, sentinel);
  append_motion(out.f, i1, j2, sentinel);
  append_motion(out.f, j1, i2, sentinel);
  append_motion(out.f, j1, j2, sentinel);
  const MotionFeature np = motion_feature_nodepair(i1, i2, j1, j2);
  out.f.insert(out.f.end(), {np.dp1.x, np.dp1.y, np.dp2.x, np.dp2.y});
  return out;
}

UnaryFeature unary_feature(const Tracklet& a, const Tracklet& b, int t_thr) {
  const MotionFeature m = motion_feature_pair(a, b);
  const double diag = 0.5 * (norm(a.tail().size) + norm(b.head().size));
  UnaryFeature f;
  f.app_cos = cosine(a.appearance, b.appearance);
  f.dp1_scaled = norm(m.dp1) / diag;
  f.dp2_scaled = norm(m.dp2) / diag;
  f.gap_frac = static_cast<double>(b.start_frame() - a.end_frame()) / t_thr;
  return f;
}

std::string node_key_string(const NodeKey& k) {
  return "n:" + std::to_string(k.first_id) + ":" + std::to_string(k.second_id);
}

std::string edge_key_string(const NodeKey& ki, const NodeKey& kj) {
  auto lt = [](const NodeKey& a, const NodeKey& b) {
    return a.first_id != b.first_id ? a.first_id < b.first_id : a.second_id < b.second_id;
  };
  const NodeKey& lo = lt(ki, kj) ? ki : kj;
  const NodeKey& hi = lt(ki, kj) ? kj : ki;
  return "e:" + std::to_string(lo.first_id) + ":" + std::to_string(lo.second_id) + ":" +
         std::to_string(hi.first_id) + ":" + std::to_string(hi.second_id);
}

std::array<double, kPairwiseInputDim> pairwise_inputs(const NodePairFeature& f,
                                                      double pos_scale) {
  const int d = f.d_a;
  auto block = [&](int b) {
    return std::vector<double>(f.f.begin() + b * d, f.f.begin() + (b + 1) * d);
  };
  const std::vector<double> ai1 = block(0), ai2 = block(1), aj1 = block(2), aj2 = block(3);

  std::array<double, kPairwiseInputDim> x{};
  x[0] = cosine(ai1, ai2);
  x[1] = cosine(aj1, aj2);
  x[2] = cosine(ai1, aj2);
  x[3] = cosine(aj1, ai2);
  const int mbase = 4 * d;
  for (int k = 0; k < 5; ++k) {
    const double* m = f.f.data() + mbase + 4 * k;
    x[4 + 2 * k] = std::hypot(m[0], m[1]) / pos_scale;
    x[5 + 2 * k] = std::hypot(m[2], m[3]) / pos_scale;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Logistic providers
// ---------------------------------------------------------------------------

LogisticUnaryProvider LogisticUnaryProvider::defaults() {
  LogisticUnaryProvider p;
  p.w = {3.0, -4.0, -4.0, -1.0, -0.5};
  return p;
}

std::array<double, 2> LogisticUnaryProvider::unary_prob(const UnaryFeature& f,
                                                        const NodeKey&) const {
  const double a = w[0] * f.app_cos + w[1] * f.dp1_scaled + w[2] * f.dp2_scaled +
                   w[3] * f.gap_frac + w[4];
  const double s = sigmoid(a);
  return {1.0 - s, s};
}

std::vector<double> LogisticUnaryProvider::parameters() const {
  return std::vector<double>(w.begin(), w.end());
}

void LogisticUnaryProvider::set_parameters(std::span<const double> p) {
  if (p.size() != w.size()) throw ContractViolation("unary parameter size mismatch");
  std::copy(p.begin(), p.end(), w.begin());
}

void LogisticUnaryProvider::save(std::ostream& os) const {
  os << "type=logistic_unary\n";
  os << "dims=" << w.size() << "\n";
  for (size_t k = 0; k < w.size(); ++k) os << (k ? " " : "") << format_double(w[k]);
  os << "\n";
}

LogisticPairwiseProvider LogisticPairwiseProvider::defaults(int d_a) {
  LogisticPairwiseProvider p;
  p.d_a = d_a;
  for (auto& row : p.w) row.fill(0.0);
  // Input slots: 0..3 appearance cosines (ii, jj, i1*j2, j1*i2), 4..13 scaled
  // motion norms in feature order, 14 bias. "Own" motion of node i sits in
  // slots 4-5, of node j in slots 10-11, node-pair geometry in 12-13.
  auto fill = [](std::array<double, kRowDim>& row, int own_cos, int own_a, int rival_cos,
                 int rival_a, double rival_w) {
    row[own_cos] = 3.0;
    row[own_a] = -3.0;
    row[own_a + 1] = -3.0;
    if (rival_w != 0.0) {
      row[rival_cos] = -rival_w;
      row[rival_a] = rival_w;
      row[rival_a + 1] = rival_w;
    }
    row[kPairwiseInputDim] = -0.5;
  };
  fill(p.w[0], 0, 4, 1, 10, 0.0);   // consistency, head i
  fill(p.w[1], 1, 10, 0, 4, 0.0);   // consistency, head j
  fill(p.w[2], 0, 4, 1, 10, 1.5);   // repellency, head i
  fill(p.w[3], 1, 10, 0, 4, 1.5);   // repellency, head j
  return p;
}

std::array<double, 2> LogisticPairwiseProvider::joint_prob(EdgeKind kind,
                                                           const NodePairFeature& f,
                                                           const NodeKey&,
                                                           const NodeKey&) const {
  const std::array<double, kPairwiseInputDim> x = pairwise_inputs(f, pos_scale);
  const int base = kind == EdgeKind::Repellency ? 2 : 0;
  std::array<double, 2> z{};
  for (int h = 0; h < 2; ++h) {
    const auto& row = w[base + h];
    double a = row[kPairwiseInputDim];
    for (int k = 0; k < kPairwiseInputDim; ++k) a += row[k] * x[k];
    z[h] = sigmoid(a);
  }
  return z;
}

std::vector<double> LogisticPairwiseProvider::parameters() const {
  std::vector<double> out;
  out.reserve(kRows * kRowDim);
  for (const auto& row : w) out.insert(out.end(), row.begin(), row.end());
  return out;
}

void LogisticPairwiseProvider::set_parameters(std::span<const double> p) {
  if (p.size() != static_cast<size_t>(kRows * kRowDim)) {
    throw ContractViolation("pairwise parameter size mismatch");
  }
  for (int r = 0; r < kRows; ++r) {
    std::copy(p.begin() + r * kRowDim, p.begin() + (r + 1) * kRowDim, w[r].begin());
  }
}

void LogisticPairwiseProvider::save(std::ostream& os) const {
  os << "type=logistic_pairwise\n";
  os << "d_a=" << d_a << "\n";
  os << "pos_scale=" << format_double(pos_scale) << "\n";
  os << "dims=" << kRows * kRowDim << "\n";
  bool first = true;
  for (const auto& row : w) {
    for (double v : row) {
      if (!first) os << " ";
      os << format_double(v);
      first = false;
    }
  }
  os << "\n";
}

// ---------------------------------------------------------------------------
// Table providers
// ---------------------------------------------------------------------------

std::array<double, 2> TableUnaryProvider::unary_prob(const UnaryFeature&,
                                                     const NodeKey& key) const {
  const auto it = table_.find(node_key_string(key));
  if (it == table_.end()) {
    throw MalformedInput("unary table has no entry for " + node_key_string(key));
  }
  return it->second;
}

void TableUnaryProvider::set(const NodeKey& key, std::array<double, 2> z) {
  table_[node_key_string(key)] = z;
}

void TableUnaryProvider::save(std::ostream& os) const {
  for (const auto& [key, z] : table_) {
    os << key << "," << format_double(z[0]) << "," << format_double(z[1]) << "\n";
  }
}

std::array<double, 2> TablePairwiseProvider::joint_prob(EdgeKind, const NodePairFeature&,
                                                        const NodeKey& ki,
                                                        const NodeKey& kj) const {
  const auto it = table_.find(edge_key_string(ki, kj));
  if (it == table_.end()) {
    throw MalformedInput("pairwise table has no entry for " + edge_key_string(ki, kj));
  }
  // Stored order follows the canonical key; flip when the caller's node order
  // is the reverse of it.
  auto lt = [](const NodeKey& a, const NodeKey& b) {
    return a.first_id != b.first_id ? a.first_id < b.first_id : a.second_id < b.second_id;
  };
  std::array<double, 2> z = it->second;
  if (lt(kj, ki)) std::swap(z[0], z[1]);
  return z;
}

void TablePairwiseProvider::set(const NodeKey& ki, const NodeKey& kj,
                                std::array<double, 2> z) {
  auto lt = [](const NodeKey& a, const NodeKey& b) {
    return a.first_id != b.first_id ? a.first_id < b.first_id : a.second_id < b.second_id;
  };
  if (lt(kj, ki)) std::swap(z[0], z[1]);
  table_[edge_key_string(ki, kj)] = z;
}

void TablePairwiseProvider::save(std::ostream& os) const {
  for (const auto& [key, z] : table_) {
    os << key << "," << format_double(z[0]) << "," << format_double(z[1]) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Provider file I/O
// ---------------------------------------------------------------------------

class ProviderIo {
 public:
  struct Parsed {
    std::map<std::string, std::string> header;
    std::vector<double> weights;
    std::vector<std::pair<std::string, std::array<double, 2>>> table;
    bool is_table = false;
  };

  static Parsed read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open provider file " + path);
    Parsed out;
    std::string line;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      if (first) {
        out.is_table = line.find('=') == std::string::npos;
        first = false;
      }
      if (out.is_table) {
        std::stringstream ss(line);
        std::string key, z0, z1;
        if (!std::getline(ss, key, ',') || !std::getline(ss, z0, ',') ||
            !std::getline(ss, z1)) {
          throw MalformedInput(path + ":" + std::to_string(line_no) + ": bad table row");
        }
        out.table.emplace_back(key, std::array<double, 2>{parse_double(z0), parse_double(z1)});
      } else if (line.find('=') != std::string::npos) {
        const auto eq = line.find('=');
        out.header[line.substr(0, eq)] = line.substr(eq + 1);
      } else {
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) out.weights.push_back(parse_double(tok));
      }
    }
    return out;
  }

  static void fill_table(TableUnaryProvider& p, const Parsed& parsed) {
    for (const auto& [key, z] : parsed.table) p.table_[key] = z;
  }
  static void fill_table(TablePairwiseProvider& p, const Parsed& parsed) {
    for (const auto& [key, z] : parsed.table) p.table_[key] = z;
  }
};

std::shared_ptr<UnaryProvider> load_unary_provider(const std::string& path) {
  const auto parsed = ProviderIo::read(path);
  if (parsed.is_table) {
    auto p = std::make_shared<TableUnaryProvider>();
    ProviderIo::fill_table(*p, parsed);
    return p;
  }
  const auto type = parsed.header.find("type");
  if (type == parsed.header.end() || type->second != "logistic_unary") {
    throw MalformedInput(path + ": expected a unary provider file");
  }
  auto p = std::make_shared<LogisticUnaryProvider>();
  if (parsed.weights.size() != p->w.size()) {
    throw MalformedInput(path + ": expected " + std::to_string(p->w.size()) + " weights");
  }
  std::copy(parsed.weights.begin(), parsed.weights.end(), p->w.begin());
  return p;
}

std::shared_ptr<PairwiseProvider> load_pairwise_provider(const std::string& path) {
  const auto parsed = ProviderIo::read(path);
  if (parsed.is_table) {
    auto p = std::make_shared<TablePairwiseProvider>();
    ProviderIo::fill_table(*p, parsed);
    return p;
  }
  const auto type = parsed.header.find("type");
  if (type == parsed.header.end() || type->second != "logistic_pairwise") {
    throw MalformedInput(path + ": expected a pairwise provider file");
  }
  auto p = std::make_shared<LogisticPairwiseProvider>();
  if (auto it = parsed.header.find("d_a"); it != parsed.header.end()) {
    p->d_a = static_cast<int>(parse_double(it->second));
  }
  if (auto it = parsed.header.find("pos_scale"); it != parsed.header.end()) {
    p->pos_scale = parse_double(it->second);
  }
  if (parsed.weights.size() !=
      static_cast<size_t>(LogisticPairwiseProvider::kRows * LogisticPairwiseProvider::kRowDim)) {
    throw MalformedInput(path + ": bad pairwise weight count");
  }
  p->set_parameters(parsed.weights);
  return p;
}

namespace {
void save_to_path(const std::string& path, const auto& provider) {
  std::ofstream os(path);
  if (!os) throw MalformedInput("cannot write provider file " + path);
  provider.save(os);
}
}  // namespace

void save_provider_file(const std::string& path, const UnaryProvider& p) {
  save_to_path(path, p);
}
void save_provider_file(const std::string& path, const PairwiseProvider& p) {
  save_to_path(path, p);
}

ProviderSet ProviderSet::defaults(int d_a) {
  ProviderSet s;
  s.unary = std::make_shared<LogisticUnaryProvider>(LogisticUnaryProvider::defaults());
  s.pairwise =
      std::make_shared<LogisticPairwiseProvider>(LogisticPairwiseProvider::defaults(d_a));
  return s;
}

// ---------------------------------------------------------------------------
// Potential formulas
// ---------------------------------------------------------------------------

double unary_potential(double z, double w_u, double eps) { return -w_u * std::log(z + eps); }

PotentialTable pairwise_potential(double z_i, double z_j, double w_d, double eps) {
  const std::array<double, 2> zi{1.0 - z_i, z_i};
  const std::array<double, 2> zj{1.0 - z_j, z_j};
  PotentialTable t;
  for (int li = 0; li < 2; ++li) {
    for (int lj = 0; lj < 2; ++lj) {
      t[li][lj] = -w_d * std::log(zi[li] * zj[lj] + eps);
    }
  }
  return t;
}

std::array<double, 2> unary_probability(const Tracklet& a, const Tracklet& b, int t_thr,
                                        const UnaryProvider& provider) {
  const UnaryFeature f = unary_feature(a, b, t_thr);
  return provider.unary_prob(f, NodeKey{a.id, b.id});
}

}  // namespace crfmot
