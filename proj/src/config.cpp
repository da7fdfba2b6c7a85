#include "quadmcv/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::config {

namespace pt = boost::property_tree;

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Hover: return "hover";
    case TrajectoryKind::Line: return "line";
    case TrajectoryKind::Circuit: return "circuit";
    case TrajectoryKind::Waypoints: return "waypoints";
  }
  return "unknown";
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == ',' || c == '[' || c == ']' || c == ';') c = ' ';
  }
  std::istringstream in(cleaned);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", key, tok));
    }
    out.push_back(v);
  }
  return out;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"vehicle",
       {"mass", "gravity", "drag", "drag_reading", "drag_matrix", "drag_uses_airspeed",
        "quat_norm_gain", "thrust_max"}},
      {"cost", {"Q", "R", "Qf", "gamma"}},
      {"wind",
       {"source", "mean", "covariance", "sample_period", "trace", "interpolation", "stride",
        "noise_intensity_scale"}},
      {"trajectory", {"type", "hover_point", "duration", "waypoints", "rest_to_rest"}},
      {"run",
       {"dt", "runs", "seed", "gammas", "out", "plots", "dump_matrices", "mcv_eps",
        "mcv_max_iter"}},
  };
  return keys;
}

// Typed access to one section; every getter names "section.key" in errors.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string raw(const std::string& key) const { return tree_->get<std::string>(pt::ptree::path_type(key, '\0')); }

  std::string key(const std::string& k) const { return name_ + "." + k; }

  std::string str(const std::string& k, const std::string& fallback) const {
    return has(k) ? trim(raw(k)) : fallback;
  }

  double number(const std::string& k, double fallback) const {
    if (!has(k)) return fallback;
    const auto v = parse_list(raw(k), key(k));
    if (v.size() != 1) throw ConfigError(fmt::format("{}: expected one number", key(k)));
    return v.front();
  }

  long long integer(const std::string& k, long long fallback) const {
    if (!has(k)) return fallback;
    const std::string text = trim(raw(k));
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (text.empty() || used != text.size()) {
      throw ConfigError(fmt::format("{}: '{}' is not an integer", key(k), text));
    }
    return v;
  }

  bool boolean(const std::string& k, bool fallback) const {
    if (!has(k)) return fallback;
    std::string v = trim(raw(k));
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key(k), v));
  }

  Vec3 vec3(const std::string& k, const Vec3& fallback) const {
    if (!has(k)) return fallback;
    const auto v = parse_list(raw(k), key(k));
    if (v.size() != 3) throw ConfigError(fmt::format("{}: expected 3 numbers", key(k)));
    return Vec3(v[0], v[1], v[2]);
  }

  // n diagonal entries or a full row-major n x n matrix.
  MatrixXd matrix(const std::string& k, const MatrixXd& fallback, Eigen::Index n) const {
    if (!has(k)) return fallback;
    const auto v = parse_list(raw(k), key(k));
    const auto count = static_cast<Eigen::Index>(v.size());
    if (count == n) {
      return Eigen::Map<const VectorXd>(v.data(), n).asDiagonal();
    }
    if (count == n * n) {
      return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>(v.data(), n, n);
    }
    throw ConfigError(fmt::format("{}: expected {} (diagonal) or {} entries, got {}", key(k), n,
                                  n * n, count));
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\"");
    return s.substr(b, e - b + 1);
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(fmt::format("{} {}", key, what));
}

std::vector<trajectory::Waypoint> parse_waypoints(const std::string& text, const std::string& key) {
  std::vector<trajectory::Waypoint> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (Section::trim(item).empty()) continue;
    const auto v = parse_list(item, key);
    if (v.size() != 4) {
      throw ConfigError(fmt::format("{}: each waypoint is 'x y z t', got '{}'", key,
                                    Section::trim(item)));
    }
    out.push_back({Vec3(v[0], v[1], v[2]), v[3]});
  }
  return out;
}

pt::ptree read_tree(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  return tree;
}

void apply_overrides(pt::ptree& tree, const Overrides& overrides) {
  for (const auto& [name, value] : overrides) {
    const auto dot = name.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == name.size()) {
      throw ConfigError(fmt::format("override '{}' must be section.key", name));
    }
    const pt::ptree::path_type section(name.substr(0, dot), '\0');
    auto child = tree.get_child_optional(section);
    pt::ptree& body = child ? *child : tree.add_child(section, pt::ptree{});
    body.put(pt::ptree::path_type(name.substr(dot + 1), '\0'), value);
  }
}

void reject_unknown(const pt::ptree& tree) {
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = keys.find(section);
    if (it == keys.end()) {
      if (body.empty()) throw ConfigError(fmt::format("key '{}' outside any section", section));
      throw ConfigError(fmt::format("unknown section [{}]", section));
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) {
        throw ConfigError(fmt::format("unknown key {}.{}", section, key));
      }
      (void)value;
    }
  }
}

Config build(const pt::ptree& tree, const std::filesystem::path& base_dir) {
  auto section = [&tree](const std::string& name) {
    const auto it = tree.find(name);
    return Section(it == tree.not_found() ? nullptr : &it->second, name);
  };
  const Section vehicle = section("vehicle");
  const Section cost = section("cost");
  const Section wind_sec = section("wind");
  const Section traj = section("trajectory");
  const Section run = section("run");

  Config c;
  sim::Scenario& s = c.scenario;

  // [vehicle]
  s.params.mass = vehicle.number("mass", 1.0);
  require(s.params.mass > 0.0, "vehicle.mass", "must be > 0");
  s.params.gravity = vehicle.number("gravity", 9.81);
  require(s.params.gravity >= 0.0, "vehicle.gravity", "must be >= 0");
  const std::string drag = vehicle.str("drag", "formula");
  if (drag == "formula") {
    const std::string reading = vehicle.str("drag_reading", "additive");
    if (reading == "additive") {
      s.params.drag = dynamics::FormulaDrag{dynamics::DragReading::Additive};
    } else if (reading == "scaled") {
      s.params.drag = dynamics::FormulaDrag{dynamics::DragReading::Scaled};
    } else {
      throw ConfigError(
          fmt::format("vehicle.drag_reading must be additive or scaled (got '{}')", reading));
    }
    require(!vehicle.has("drag_matrix"), "vehicle.drag_matrix", "requires vehicle.drag = fixed");
  } else if (drag == "fixed") {
    const Mat3 d = vehicle.matrix("drag_matrix", Mat3::Zero(), 3);
    require(d.allFinite() && (d - d.transpose()).cwiseAbs().maxCoeff() < 1e-12,
            "vehicle.drag_matrix", "must be finite and symmetric");
    s.params.drag = dynamics::FixedDrag{d};
  } else {
    throw ConfigError(fmt::format("vehicle.drag must be formula or fixed (got '{}')", drag));
  }
  s.params.drag_uses_airspeed = vehicle.boolean("drag_uses_airspeed", false);
  s.params.quat_norm_gain = vehicle.number("quat_norm_gain", 1.0);
  require(s.params.quat_norm_gain >= 0.0, "vehicle.quat_norm_gain", "must be >= 0");
  if (vehicle.has("thrust_max")) {
    s.thrust_max = vehicle.number("thrust_max", 0.0);
    require(*s.thrust_max > 0.0, "vehicle.thrust_max", "must be > 0");
  }
  s.u0 = dynamics::Input{};
  s.u0.thrust = s.params.mass * s.params.gravity;

  // [cost]
  const auto defaults = sim::default_cost();
  s.cost.Q = cost.matrix("Q", defaults.Q, kStateDim);
  s.cost.R = cost.matrix("R", defaults.R, kInputDim);
  s.cost.Qf = cost.matrix("Qf", defaults.Qf, kStateDim);
  try {
    s.cost.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("cost: {}", e.what()));
  }

  // [wind]
  const std::string source = wind_sec.str("source", "gaussian");
  s.noise_intensity_scale = wind_sec.number("noise_intensity_scale", 1.0);
  require(s.noise_intensity_scale >= 0.0, "wind.noise_intensity_scale", "must be >= 0");
  if (source == "gaussian") {
    wind::GaussianSource g;
    g.model = sim::default_wind_model();
    g.model.mean = wind_sec.vec3("mean", g.model.mean);
    g.model.covariance = wind_sec.matrix("covariance", g.model.covariance, 3);
    try {
      wind::validate(g.model);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("wind.covariance: {}", e.what()));
    }
    g.sample_period = wind_sec.number("sample_period", 0.0);
    require(g.sample_period >= 0.0, "wind.sample_period", "must be >= 0");
    for (const char* k : {"trace", "interpolation", "stride"}) {
      require(!wind_sec.has(k), wind_sec.key(k), "requires wind.source = replay");
    }
    s.wind = g;
  } else if (source == "replay") {
    require(wind_sec.has("trace"), "wind.trace", "is required for wind.source = replay");
    for (const char* k : {"mean", "covariance", "sample_period"}) {
      require(!wind_sec.has(k), wind_sec.key(k), "is estimated from the trace for replay");
    }
    std::filesystem::path trace = wind_sec.str("trace", "");
    if (trace.is_relative()) trace = base_dir / trace;
    require(std::filesystem::exists(trace), "wind.trace",
            fmt::format("file '{}' does not exist", trace.string()));
    wind::ReplaySource r;
    r.trace = std::make_shared<const wind::WindTrace>(wind::read_trace_csv(trace.string()));
    try {
      r.mode = wind::interpolation_from_string(wind_sec.str("interpolation", "zoh"));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("wind.interpolation: {}", e.what()));
    }
    r.stride = wind_sec.number("stride", 0.0);
    require(r.stride >= 0.0, "wind.stride", "must be >= 0");
    s.wind = r;
  } else {
    throw ConfigError(fmt::format("wind.source must be gaussian or replay (got '{}')", source));
  }

  // [trajectory]
  std::string type = traj.str("type", traj.has("waypoints") ? "waypoints" : "hover");
  if (type == "hover") {
    c.trajectory = TrajectoryKind::Hover;
  } else if (type == "line") {
    c.trajectory = TrajectoryKind::Line;
  } else if (type == "circuit") {
    c.trajectory = TrajectoryKind::Circuit;
  } else if (type == "waypoints") {
    c.trajectory = TrajectoryKind::Waypoints;
  } else {
    throw ConfigError(fmt::format(
        "trajectory.type must be hover, line, circuit or waypoints (got '{}')", type));
  }
  const bool hovering = c.trajectory == TrajectoryKind::Hover;
  require(hovering || (!traj.has("hover_point") && !traj.has("duration")), "trajectory.type",
          "hover_point/duration apply only to type = hover");
  require(c.trajectory == TrajectoryKind::Waypoints || !traj.has("waypoints"),
          "trajectory.waypoints", "requires trajectory.type = waypoints");
  c.hover_point = traj.vec3("hover_point", c.hover_point);
  c.hover_duration = traj.number("duration", c.hover_duration);
  require(c.hover_duration > 0.0, "trajectory.duration", "must be > 0");
  const bool rest_to_rest = traj.boolean("rest_to_rest", true);

  double track_gamma = 0.75;
  switch (c.trajectory) {
    case TrajectoryKind::Hover: break;
    case TrajectoryKind::Line: c.waypoints = trajectory::default_line_waypoints(); break;
    case TrajectoryKind::Circuit:
      c.waypoints = trajectory::default_circuit_waypoints();
      track_gamma = 0.5;
      break;
    case TrajectoryKind::Waypoints:
      require(traj.has("waypoints"), "trajectory.waypoints", "is required for type = waypoints");
      c.waypoints = parse_waypoints(traj.raw("waypoints"), "trajectory.waypoints");
      require(c.waypoints.size() >= 2, "trajectory.waypoints", "needs at least 2 waypoints");
      require(std::abs(c.waypoints.front().time) < 1e-12, "trajectory.waypoints",
              "must start at t = 0");
      break;
  }
  s.cost.gamma = cost.number("gamma", track_gamma);
  require(s.cost.gamma >= 0.0, "cost.gamma", "must be >= 0");

  // [run]
  s.dt = run.number("dt", 0.01);
  require(s.dt > 0.0, "run.dt", "must be > 0");
  const long long runs = run.integer("runs", 50);
  require(runs >= 2 && runs <= 1000000, "run.runs", "must be in [2, 1000000]");
  s.n_runs = static_cast<int>(runs);
  const long long seed = run.integer("seed", 1);
  require(seed >= 0, "run.seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  if (run.has("gammas")) {
    c.gammas = parse_list(run.raw("gammas"), "run.gammas");
    require(!c.gammas.empty(), "run.gammas", "must not be empty");
    for (std::size_t i = 0; i < c.gammas.size(); ++i) {
      require(c.gammas[i] >= 0.0 && (i == 0 || c.gammas[i] > c.gammas[i - 1]), "run.gammas",
              "must be >= 0 and strictly increasing");
    }
  }
  c.out_dir = run.str("out", "out");
  require(!c.out_dir.empty(), "run.out", "must not be empty");
  c.plots = run.boolean("plots", true);
  c.dump_matrices = run.boolean("dump_matrices", false);
  s.mcv_options.eps = run.number("mcv_eps", s.mcv_options.eps);
  require(s.mcv_options.eps > 0.0, "run.mcv_eps", "must be > 0");
  const long long max_iter = run.integer("mcv_max_iter", s.mcv_options.max_iter);
  require(max_iter >= 1 && max_iter <= 100000, "run.mcv_max_iter", "must be in [1, 100000]");
  s.mcv_options.max_iter = static_cast<int>(max_iter);

  // Trajectory, initial state and controller.
  if (hovering) {
    s.trajectory = trajectory::hover(c.hover_point, c.hover_duration);
    s.controller = sim::ControllerKind::McvInfinite;
    s.x0 = trajectory::reference_state(s.trajectory, 0.0, wind::statistics(s.wind).mean);
  } else {
    try {
      s.trajectory = trajectory::min_snap(c.waypoints, rest_to_rest);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("trajectory.waypoints: {}", e.what()));
    }
    s.controller = sim::ControllerKind::McvFinite;
    s.x0 = dynamics::State{};
    s.x0.p = c.waypoints.front().position;
    s.x0.v = Vec3(0.001, 0.0, 0.0);
  }
  const double ratio = s.trajectory.duration() / s.dt;
  require(std::abs(ratio - std::round(ratio)) < 1e-6, "run.dt",
          fmt::format("= {} does not divide the {} s horizon", s.dt, s.trajectory.duration()));
  s.validate();
  return c;
}

}  // namespace

Config parse(std::istream& in, const Overrides& overrides,
             const std::filesystem::path& base_dir) {
  pt::ptree tree = read_tree(in);
  apply_overrides(tree, overrides);
  reject_unknown(tree);
  return build(tree, base_dir);
}

Config load(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  return parse(in, overrides, path.parent_path().empty() ? "." : path.parent_path());
}

Config defaults(const Overrides& overrides) {
  std::istringstream empty;
  return parse(empty, overrides, ".");
}

std::string wind_section(const wind::WindModel& model) {
  const Mat3& c = model.covariance;
  return fmt::format(
      "[wind]\nsource = gaussian\nmean = {:.10g}, {:.10g}, {:.10g}\n"
      "covariance = {:.10g}, {:.10g}, {:.10g}, {:.10g}, {:.10g}, {:.10g}, {:.10g}, {:.10g}, "
      "{:.10g}\n",
      model.mean.x(), model.mean.y(), model.mean.z(), c(0, 0), c(0, 1), c(0, 2), c(1, 0),
      c(1, 1), c(1, 2), c(2, 0), c(2, 1), c(2, 2));
}

}  // namespace quadmcv::config
