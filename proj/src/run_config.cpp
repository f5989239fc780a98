#include "crfmot/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace crfmot {

namespace {

struct KeyEntry {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double to_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw MalformedInput("bad numeric config value '" + s + "'");
  }
  return v;
}

int to_int(const std::string& s) { return static_cast<int>(to_double(s)); }

std::string from_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> entries = [] {
    std::vector<KeyEntry> r;
    auto add = [&r](std::string name, std::function<std::string(const RunConfig&)> get,
                    std::function<void(RunConfig&, const std::string&)> set) {
      r.push_back({std::move(name), std::move(get), std::move(set)});
    };

#define CFG_DOUBLE(key, field)                                            \
  add(key, [](const RunConfig& c) { return from_double(c.field); },      \
      [](RunConfig& c, const std::string& v) { c.field = to_double(v); })
#define CFG_INT(key, field)                                               \
  add(key, [](const RunConfig& c) { return std::to_string(c.field); },   \
      [](RunConfig& c, const std::string& v) { c.field = to_int(v); })
#define CFG_STRING(key, field)                              \
  add(key, [](const RunConfig& c) { return c.field; },      \
      [](RunConfig& c, const std::string& v) { c.field = v; })

    CFG_STRING("mode", mode);
    add("d_a", [](const RunConfig& c) { return std::to_string(c.d_a); },
        [](RunConfig& c, const std::string& v) {
          c.d_a = to_int(v);
          c.scene.d_a = c.d_a;
        });
    CFG_INT("jobs", jobs);
    CFG_DOUBLE("iou_threshold", iou_threshold);
    CFG_DOUBLE("min_visibility", min_visibility);
    CFG_INT("train_scenes", train_scenes);
    CFG_INT("val_scenes", val_scenes);
    CFG_STRING("unary_provider", unary_provider);
    CFG_STRING("pairwise_provider", pairwise_provider);

    CFG_DOUBLE("w_u", params.w_u);
    CFG_DOUBLE("w_d", params.w_d);
    CFG_DOUBLE("gamma", params.gamma);
    CFG_DOUBLE("epsilon", params.epsilon);
    CFG_INT("iterations", params.iterations);
    CFG_INT("t_thr_round1", params.t_thr_round1);
    CFG_INT("t_thr_round2", params.t_thr_round2);
    CFG_INT("window_size", params.window_size);
    CFG_DOUBLE("window_overlap", params.window_overlap);
    add("projection",
        [](const RunConfig& c) {
          return c.params.projection == Projection::kSoftmax ? "softmax" : "clip-renorm";
        },
        [](RunConfig& c, const std::string& v) {
          if (v == "softmax") {
            c.params.projection = Projection::kSoftmax;
          } else if (v == "clip-renorm") {
            c.params.projection = Projection::kClipRenorm;
          } else {
            throw MalformedInput("projection must be softmax or clip-renorm, got '" + v + "'");
          }
        });

    CFG_DOUBLE("theta_high", link.theta_high);
    CFG_DOUBLE("theta_margin", link.theta_margin);
    CFG_DOUBLE("sigma_size", link.sigma_size);
    CFG_INT("velocity_window", link.velocity_window);

    CFG_DOUBLE("tau_close", difficult.tau_close);
    CFG_INT("delta_t", difficult.delta_t);

    CFG_INT("n_targets", scene.n_targets);
    CFG_INT("n_frames", scene.n_frames);
    CFG_DOUBLE("arena_w", scene.arena_w);
    CFG_DOUBLE("arena_h", scene.arena_h);
    CFG_DOUBLE("speed_min", scene.speed_min);
    CFG_DOUBLE("speed_max", scene.speed_max);
    CFG_DOUBLE("dir_change_prob", scene.dir_change_prob);
    CFG_INT("crossings", scene.crossings);
    CFG_DOUBLE("miss_rate", scene.miss_rate);
    CFG_DOUBLE("fp_rate", scene.fp_rate);
    CFG_DOUBLE("pos_noise", scene.pos_noise);
    CFG_DOUBLE("app_noise", scene.app_noise);
    CFG_INT("occlusion_max", scene.occlusion_max);
    add("seed", [](const RunConfig& c) { return std::to_string(c.scene.seed); },
        [](RunConfig& c, const std::string& v) {
          c.scene.seed = static_cast<std::uint64_t>(to_double(v));
        });

    CFG_DOUBLE("learning_rate", schedule.learning_rate);
    CFG_INT("epochs", schedule.epochs);
    CFG_INT("batch", schedule.batch);
    CFG_INT("patience", schedule.patience);
    add("train_seed", [](const RunConfig& c) { return std::to_string(c.schedule.seed); },
        [](RunConfig& c, const std::string& v) {
          c.schedule.seed = static_cast<std::uint64_t>(to_double(v));
        });

#undef CFG_DOUBLE
#undef CFG_INT
#undef CFG_STRING
    return r;
  }();
  return entries;
}

}  // namespace

void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeyEntry& e : registry()) {
    if (e.name == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw MalformedInput("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open config file " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // Trim.
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw MalformedInput(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_config_override(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const MalformedInput& err) {
      throw MalformedInput(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const KeyEntry& e : registry()) os << e.name << "=" << e.get(cfg) << "\n";
  return os.str();
}

ProviderSet make_providers(const RunConfig& cfg) {
  ProviderSet s = ProviderSet::defaults(cfg.d_a);
  if (!cfg.unary_provider.empty()) s.unary = load_unary_provider(cfg.unary_provider);
  if (!cfg.pairwise_provider.empty()) s.pairwise = load_pairwise_provider(cfg.pairwise_provider);
  return s;
}

AssociationMode parse_mode(const std::string& mode) {
  if (mode == "crf") return AssociationMode::kCrf;
  if (mode == "unary") return AssociationMode::kUnary;
  throw MalformedInput("mode must be crf or unary, got '" + mode + "'");
}

}  // namespace crfmot
