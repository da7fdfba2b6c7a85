#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "quadmcv/sim.hpp"

namespace quadmcv::config {

enum class TrajectoryKind { Hover, Line, Circuit, Waypoints };

std::string to_string(TrajectoryKind kind);

/// A parsed scenario file plus run settings. `scenario` has its trajectory,
/// wind source and initial state filled in; cost.gamma is the tracking gamma.
struct Config {
  sim::Scenario scenario;
  TrajectoryKind trajectory = TrajectoryKind::Hover;
  std::vector<trajectory::Waypoint> waypoints;
  Vec3 hover_point = Vec3(1.0, 1.0, 8.0);
  double hover_duration = 20.0;
  std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25};
  std::filesystem::path out_dir = "out";
  bool plots = true;
  bool dump_matrices = false;
};

/// "section.key" -> raw value, applied on top of the file before validation.
using Overrides = std::map<std::string, std::string>;

/// INI document with sections [vehicle], [cost], [wind], [trajectory], [run].
/// Every key is optional; unknown sections or keys are rejected. Relative
/// trace paths resolve against `base_dir`. Throws ConfigError naming the key.
Config parse(std::istream& in, const Overrides& overrides = {},
             const std::filesystem::path& base_dir = ".");

/// parse() on a file; IoError if it cannot be opened.
Config load(const std::filesystem::path& path, const Overrides& overrides = {});

/// Defaults only (hover at (1,1,8)); overrides still apply.
Config defaults(const Overrides& overrides = {});

/// Parses "a, b, c" (also accepts brackets and whitespace separators).
std::vector<double> parse_list(const std::string& text, const std::string& key);

/// The [wind] section for a model, usable in a config file.
std::string wind_section(const wind::WindModel& model);

}  // namespace quadmcv::config
