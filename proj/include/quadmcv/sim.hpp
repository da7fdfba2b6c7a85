#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quadmcv/dynamics.hpp"
#include "quadmcv/riccati.hpp"
#include "quadmcv/trajectory.hpp"
#include "quadmcv/wind.hpp"

namespace quadmcv::sim {

enum class ControllerKind { LqrInfinite, McvInfinite, LqrFinite, McvFinite };

std::string to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);
bool is_finite_horizon(ControllerKind kind);

struct Scenario {
  trajectory::PolyTrajectory trajectory;
  dynamics::Params params;
  riccati::CostSpec cost;
  wind::WindSource wind;
  ControllerKind controller = ControllerKind::McvInfinite;
  double dt = 0.01;
  dynamics::State x0;
  /// Nominal input u0 of the feedback law u = u0 + K (x - x_n).
  dynamics::Input u0;
  int n_runs = 50;
  std::uint64_t seed = 1;
  /// Multiplies the wind covariance before it is used as the controller's W.
  double noise_intensity_scale = 1.0;
  /// Added to a reference velocity slower than 1e-6 m/s before linearizing.
  Vec3 linearization_velocity_seed = Vec3(0.001, 0.0, 0.0);
  std::optional<double> thrust_max;
  riccati::McvOptions mcv_options;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Number of integration steps, t_f / dt.
  std::size_t steps() const;
};

/// Cost weights used throughout the experiments.
riccati::CostSpec default_cost(double gamma = 0.0);

/// Default wind: mean [2.72, 1.752, -0.006] m/s, covariance diag(0.15, 0.09, 0.015).
wind::WindModel default_wind_model();

/// Hover at (1,1,8) for `duration` seconds, started on the reference.
Scenario hover_scenario(double gamma, double duration = 20.0);

/// Minimum snap tracking scenario started from the first waypoint with
/// v = [0.001, 0, 0].
Scenario tracking_scenario(std::span<const trajectory::Waypoint> waypoints, double gamma);

/// Seed of run i: base XOR splitmix64(i).
std::uint64_t run_seed(std::uint64_t base, std::size_t run_index);

/// Linearizations along the reference on the dt grid.
riccati::LinearSchedule linearize_along(const Scenario& scenario);

/// Linearization at the first reference point with the controller's G and W.
dynamics::LinearModel hover_linear_model(const Scenario& scenario);

/// Constant gain (infinite horizon) or a schedule on the dt grid (finite).
riccati::GainSchedule build_controller(const Scenario& scenario);

struct RunLog {
  std::vector<double> times;
  std::vector<dynamics::State> states;
  std::vector<dynamics::Input> inputs;
  std::vector<Vec3> winds;
  std::vector<dynamics::State> references;
  /// p - p_n
  std::vector<Vec3> errors;
  dynamics::Input nominal_input;
  std::uint64_t seed = 0;
  double max_quat_norm_error = 0.0;
  double max_rotation_error = 0.0;
};

/// Closed-loop run of the nonlinear model. Throws DivergenceError with the
/// failure time.
RunLog simulate(const Scenario& scenario, const riccati::GainSchedule& gains,
                std::size_t run_index);

/// Left Riemann sum of e^T Q e + du^T R du plus the terminal e^T Qf e, in error
/// coordinates about the reference and the nominal input.
double evaluate_cost(const RunLog& log, const riccati::CostSpec& cost);

struct MetricsReport {
  std::vector<double> times;
  /// Unbiased across-run variance of p - p_n at each grid point.
  std::vector<Vec3> variance;
  std::vector<Vec3> stddev;
  std::vector<Vec3> rmse;
  std::vector<Vec3> mean_error;
  std::vector<double> costs;
  double cost_mean = 0.0;
  double cost_variance = 0.0;
  std::size_t runs = 0;
  std::vector<std::uint64_t> seeds;
  double max_quat_norm_error = 0.0;
  double max_rotation_error = 0.0;
  /// Run 0, kept for plotting.
  std::optional<RunLog> first_run;

  Vec3 average_variance() const;
  Vec3 average_rmse() const;
  /// Sample surrogate of E[J] + gamma Var[J].
  double objective(double gamma) const { return cost_mean + gamma * cost_variance; }
};

/// Cross-run reduction in run order.
MetricsReport aggregate(std::span<const RunLog> logs, const riccati::CostSpec& cost);

/// n_runs independent runs in parallel (OpenMP); results keyed by run index, so
/// the report does not depend on scheduling.
MetricsReport monte_carlo(const Scenario& scenario, const riccati::GainSchedule& gains);

/// Serial reference for monte_carlo; must agree bit for bit.
MetricsReport monte_carlo_serial(const Scenario& scenario, const riccati::GainSchedule& gains);

struct SweepEntry {
  double gamma = 0.0;
  riccati::GainSchedule gains;
  MetricsReport metrics;
};

/// monte_carlo per gamma with the same seed schedule (common random numbers).
std::vector<SweepEntry> gamma_sweep(const Scenario& scenario, std::span<const double> gammas);

void write_runlog_csv(std::ostream& out, const RunLog& log);
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
/// One row per knot: t, then <name>_i_j for every entry (row-major).
void write_matrix_series_csv(std::ostream& out, const std::string& name,
                             const std::vector<double>& times,
                             const std::vector<MatrixXd>& series);

}  // namespace quadmcv::sim
