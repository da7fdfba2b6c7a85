#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "quadmcv/config.hpp"

namespace quadmcv::app {

/// Exit status of a check run with at least one failing row.
inline constexpr int kCheckFailed = 3;

/// Gamma sweep at the hover point: per-gamma metrics and run logs, the sweep
/// table, and trajectory/variance/RMSE plots. Returns 0; throws quadmcv::Error.
int cmd_hover(const config::Config& cfg, std::ostream& log);

/// Finite-horizon MCV and LQR on the configured trajectory at cost.gamma, with
/// per-point comparison files and plots.
int cmd_track(const config::Config& cfg, std::ostream& log);

struct CheckOptions {
  int jacobian_samples = 100;
  int lyapunov_samples = 50;
  std::uint64_t seed = 7;
  /// Test hook: added to every entry of the analytic A before comparison.
  double jacobian_perturbation = 0.0;
};

struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  /// Error text when the check threw.
  std::string note;
};

/// Jacobian finite-difference, Lyapunov/CARE residual, and gamma=0 / W=0
/// reduction checks.
std::vector<CheckRow> run_checks(const config::Config& cfg, const CheckOptions& options);

/// Prints the table; returns 0 if every row passes, kCheckFailed otherwise.
int cmd_check(const config::Config& cfg, const CheckOptions& options, std::ostream& log);

/// Prints the estimated mean and covariance of a trace; with `out_dir`, also
/// writes wind_model.ini holding a [wind] section.
int cmd_windstats(const std::filesystem::path& trace,
                  const std::optional<std::filesystem::path>& out_dir, std::ostream& log);

/// Central-difference Jacobians of dynamics::derivative.
dynamics::Jacobians finite_difference_jacobians(const dynamics::State& x,
                                                const dynamics::Input& u, const Vec3& v_w,
                                                const dynamics::Params& params);

/// "0.25" style label used in file names.
std::string gamma_label(double gamma);

}  // namespace quadmcv::app
