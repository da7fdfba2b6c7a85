#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "quadmcv/app.hpp"
#include "quadmcv/config.hpp"
#include "quadmcv/errors.hpp"

namespace {

const char* kind_name(quadmcv::ErrorKind kind) {
  switch (kind) {
    case quadmcv::ErrorKind::Config: return "config error";
    case quadmcv::ErrorKind::Solver: return "solver error";
    case quadmcv::ErrorKind::Divergence: return "divergence";
    case quadmcv::ErrorKind::Io: return "I/O error";
  }
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Minimum cost variance and LQR control of a quadrotor in stochastic wind"};
  cli.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<long long> seed;
  std::optional<long long> runs;
  std::optional<std::string> gamma;
  std::vector<std::string> sets;
  bool dump = false;
  bool no_plots = false;
  cli.add_option("--config", config_path, "Scenario file (INI)")->check(CLI::ExistingFile);
  cli.add_option("--out", out_dir, "Output directory");
  cli.add_option("--seed", seed, "Base random seed");
  cli.add_option("--runs", runs, "Monte Carlo runs");
  cli.add_option("--gamma", gamma, "Comma-separated gamma list (track uses one value)");
  cli.add_option("--set", sets, "Override a key: section.key=value")->take_all();
  cli.add_flag("--dump-matrices", dump, "Write M, H and K trajectories");
  cli.add_flag("--no-plots", no_plots, "Skip SVG output");

  auto* hover = cli.add_subcommand("hover", "Gamma sweep at the hover point")->fallthrough();
  auto* track = cli.add_subcommand("track", "Finite-horizon MCV vs LQR tracking")->fallthrough();
  auto* check = cli.add_subcommand("check", "Self-verification suite")->fallthrough();
  auto* windstats =
      cli.add_subcommand("windstats", "Estimate a wind model from a trace")->fallthrough();

  quadmcv::app::CheckOptions check_opts;
  check->add_option("--perturb-jacobian", check_opts.jacobian_perturbation)
      ->group("");  // test hook
  std::string trace;
  windstats->add_option("trace", trace, "Wind trace CSV (t,wx,wy,wz)")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : static_cast<int>(quadmcv::ErrorKind::Config);
  }

  try {
    if (windstats->parsed()) {
      std::optional<std::filesystem::path> out;
      if (out_dir) out = *out_dir;
      return quadmcv::app::cmd_windstats(trace, out, std::cout);
    }

    quadmcv::config::Overrides overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw quadmcv::ConfigError(fmt::format("--set '{}' must be section.key=value", s));
      }
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    // A bare `track` runs the straight line.
    if (track->parsed() && config_path.empty() && !overrides.count("trajectory.type") &&
        !overrides.count("trajectory.waypoints")) {
      overrides["trajectory.type"] = "line";
    }
    if (out_dir) overrides["run.out"] = *out_dir;
    if (seed) overrides["run.seed"] = std::to_string(*seed);
    if (runs) overrides["run.runs"] = std::to_string(*runs);
    if (gamma) {
      if (track->parsed()) {
        const auto values = quadmcv::config::parse_list(*gamma, "--gamma");
        if (values.size() != 1) {
          throw quadmcv::ConfigError("--gamma: track takes a single value");
        }
        overrides["cost.gamma"] = *gamma;
      } else {
        overrides["run.gammas"] = *gamma;
      }
    }
    if (dump) overrides["run.dump_matrices"] = "true";
    if (no_plots) overrides["run.plots"] = "false";

    const auto cfg = config_path.empty() ? quadmcv::config::defaults(overrides)
                                         : quadmcv::config::load(config_path, overrides);
    if (hover->parsed()) return quadmcv::app::cmd_hover(cfg, std::cout);
    if (track->parsed()) return quadmcv::app::cmd_track(cfg, std::cout);
    if (check->parsed()) return quadmcv::app::cmd_check(cfg, check_opts, std::cout);
  } catch (const quadmcv::Error& e) {
    std::cerr << fmt::format("quadmcv: {}: {}\n", kind_name(e.kind()), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << fmt::format("quadmcv: internal error: {}\n", e.what());
    return 1;
  }
  return 0;
}
