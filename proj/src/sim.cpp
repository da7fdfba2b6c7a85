#include "quadmcv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::sim {

using dynamics::Input;
using dynamics::State;

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::LqrInfinite: return "lqr";
    case ControllerKind::McvInfinite: return "mcv";
    case ControllerKind::LqrFinite: return "lqr-finite";
    case ControllerKind::McvFinite: return "mcv-finite";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "lqr") return ControllerKind::LqrInfinite;
  if (name == "mcv") return ControllerKind::McvInfinite;
  if (name == "lqr-finite") return ControllerKind::LqrFinite;
  if (name == "mcv-finite") return ControllerKind::McvFinite;
  throw ConfigError(fmt::format("unknown controller '{}'", name));
}

bool is_finite_horizon(ControllerKind kind) {
  return kind == ControllerKind::LqrFinite || kind == ControllerKind::McvFinite;
}

void Scenario::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError(fmt::format("dt must be > 0 (got {})", dt));
  if (trajectory.segments().empty()) throw ConfigError("scenario has no trajectory");
  if (std::abs(trajectory.start_time()) > 1e-12) throw ConfigError("trajectory must start at t=0");
  const double ratio = trajectory.duration() / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 || std::round(ratio) < 1.0) {
    throw ConfigError(fmt::format("dt={} does not divide the trajectory duration {}", dt,
                                  trajectory.duration()));
  }
  if (!(params.mass > 0.0)) throw ConfigError("vehicle mass must be > 0");
  if (!(params.gravity >= 0.0)) throw ConfigError("gravity must be >= 0");
  cost.validate();
  if (cost.Q.rows() != kStateDim || cost.R.rows() != kInputDim) {
    throw ConfigError("cost weights must be 10x10 (Q) and 4x4 (R)");
  }
  if (is_finite_horizon(controller) && cost.Qf.rows() != kStateDim) {
    throw ConfigError("finite-horizon controllers need a 10x10 Qf");
  }
  if (!x0.flat().allFinite() || std::abs(x0.q.norm() - 1.0) > 1e-6) {
    throw ConfigError("x0 must be finite with a unit quaternion");
  }
  if (!u0.flat().allFinite() || u0.thrust < 0.0) throw ConfigError("u0 must be finite with thrust >= 0");
  if (n_runs < 1) throw ConfigError("runs must be >= 1");
  if (!(noise_intensity_scale >= 0.0)) throw ConfigError("noise intensity scale must be >= 0");
  if (thrust_max && !(*thrust_max > 0.0)) throw ConfigError("thrust_max must be > 0");
  (void)wind::statistics(wind);
}

std::size_t Scenario::steps() const {
  return static_cast<std::size_t>(std::llround(trajectory.duration() / dt));
}

riccati::CostSpec default_cost(double gamma) {
  riccati::CostSpec c;
  c.Q = VectorXd((VectorXd(10) << 10, 10, 10, 1, 1, 1, 1, 0.1, 0.1, 0.1).finished()).asDiagonal();
  c.R = VectorXd((VectorXd(4) << 1, 5, 5, 0.1).finished()).asDiagonal();
  c.Qf = VectorXd((VectorXd(10) << 20, 20, 20, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1).finished())
             .asDiagonal();
  c.gamma = gamma;
  return c;
}

wind::WindModel default_wind_model() {
  wind::WindModel m;
  m.mean = Vec3(2.72, 1.752, -0.006);
  m.covariance = Vec3(0.15, 0.09, 0.015).asDiagonal();
  return m;
}

Scenario hover_scenario(double gamma, double duration) {
  Scenario s;
  s.trajectory = trajectory::hover(Vec3(1.0, 1.0, 8.0), duration);
  s.cost = default_cost(gamma);
  s.wind = wind::GaussianSource{default_wind_model()};
  s.controller = ControllerKind::McvInfinite;
  s.u0.thrust = s.params.mass * s.params.gravity;
  s.x0 = trajectory::reference_state(s.trajectory, 0.0, default_wind_model().mean);
  return s;
}

Scenario tracking_scenario(std::span<const trajectory::Waypoint> waypoints, double gamma) {
  Scenario s;
  s.trajectory = trajectory::min_snap(waypoints, true);
  s.cost = default_cost(gamma);
  s.wind = wind::GaussianSource{default_wind_model()};
  s.controller = ControllerKind::McvFinite;
  s.u0.thrust = s.params.mass * s.params.gravity;
  s.x0.p = waypoints.front().position;
  s.x0.v = Vec3(0.001, 0.0, 0.0);
  return s;
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run_index) {
  std::uint64_t z = static_cast<std::uint64_t>(run_index) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return base ^ (z ^ (z >> 31));
}

namespace {

struct NoiseStats {
  Vec3 mean;
  Mat3 w;
};

NoiseStats controller_noise(const Scenario& s) {
  const wind::WindModel stats = wind::statistics(s.wind);
  return {stats.mean, s.noise_intensity_scale * stats.covariance};
}

dynamics::Jacobians linearize_at(const Scenario& s, double t, const Vec3& mean_wind) {
  State x_n = trajectory::reference_state(s.trajectory, t, mean_wind);
  if (x_n.v.norm() < 1e-6) x_n.v += s.linearization_velocity_seed;
  return dynamics::linearize(x_n, s.u0, s.params, mean_wind);
}

std::vector<State> reference_path(const Scenario& s, const Vec3& mean_wind) {
  const std::size_t n = s.steps();
  std::vector<State> refs(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    refs[k] = trajectory::reference_state(s.trajectory, static_cast<double>(k) * s.dt, mean_wind);
  }
  return refs;
}

// Source of the wind applied over each integration step.
class StepWind {
 public:
  StepWind(const Scenario& s, std::size_t run_index, std::uint64_t seed) : dt_(s.dt) {
    if (const auto* g = std::get_if<wind::GaussianSource>(&s.wind)) {
      sampler_.emplace(g->model, seed);
      hold_steps_ = g->sample_period > 0.0
                        ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       std::llround(g->sample_period / s.dt)))
                        : 1;
    } else {
      const auto& r = std::get<wind::ReplaySource>(s.wind);
      trace_ = r.trace.get();
      mode_ = r.mode;
      const double horizon = s.trajectory.duration();
      const double room = trace_->end() - trace_->start() - horizon;
      if (room < -1e-9) {
        throw ConfigError(fmt::format("wind trace spans {} s, shorter than the {} s horizon",
                                      trace_->end() - trace_->start(), horizon));
      }
      const double shift = static_cast<double>(run_index) * r.stride;
      offset_ = trace_->start() + (room > 0.0 ? std::fmod(shift, room) : 0.0);
    }
  }

  Vec3 at_step(std::size_t k) {
    if (sampler_) {
      if (k % hold_steps_ == 0 || !held_) {
        current_ = (*sampler_)();
        held_ = true;
      }
      return current_;
    }
    const double t = std::min(offset_ + static_cast<double>(k) * dt_, trace_->end());
    return wind::lookup(*trace_, t, mode_);
  }

 private:
  double dt_;
  std::optional<wind::WindSampler> sampler_;
  std::size_t hold_steps_ = 1;
  Vec3 current_ = Vec3::Zero();
  bool held_ = false;
  const wind::WindTrace* trace_ = nullptr;
  wind::Interpolation mode_ = wind::Interpolation::ZeroOrderHold;
  double offset_ = 0.0;
};

Input control(const Scenario& s, const MatrixXd& k, const State& x, const State& ref) {
  const VectorXd du = k * (x.flat() - ref.flat());
  Input u = Input::from_flat(s.u0.flat() + InputVec(du));
  u.thrust = std::max(u.thrust, 0.0);
  if (s.thrust_max) u.thrust = std::min(u.thrust, *s.thrust_max);
  return u;
}

RunLog run(const Scenario& s, const riccati::GainSchedule& gains, std::size_t run_index,
           const std::vector<State>& refs) {
  const std::size_t n = s.steps();
  RunLog log;
  log.seed = run_seed(s.seed, run_index);
  log.nominal_input = s.u0;
  log.times.resize(n + 1);
  log.states.resize(n + 1);
  log.inputs.resize(n + 1);
  log.winds.resize(n + 1);
  log.references = refs;
  log.errors.resize(n + 1);

  StepWind wind_source(s, run_index, log.seed);
  State x = s.x0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    log.times[k] = t;
    log.states[k] = x;
    log.errors[k] = x.p - refs[k].p;
    log.inputs[k] = control(s, gains.gain_at_index(k), x, refs[k]);
    if (k == n) {
      log.winds[k] = log.winds[k > 0 ? k - 1 : 0];
      break;
    }
    const Vec3 v_w = wind_source.at_step(k);
    log.winds[k] = v_w;
    try {
      x = dynamics::step(x, log.inputs[k], v_w, s.dt, s.params);
    } catch (const DivergenceError&) {
      throw DivergenceError(
          fmt::format("run {} (seed {}) diverged at t={:.4f} s from p=[{:.4g}, {:.4g}, {:.4g}]",
                      run_index, log.seed, t + s.dt, x.p.x(), x.p.y(), x.p.z()),
          t + s.dt);
    }
    log.max_quat_norm_error = std::max(log.max_quat_norm_error, std::abs(x.q.norm() - 1.0));
    const Mat3 r = dynamics::quat_to_rotation(x.q);
    log.max_rotation_error = std::max(
        log.max_rotation_error, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  return log;
}

struct RunSummary {
  std::vector<Vec3> errors;
  double cost = 0.0;
  std::uint64_t seed = 0;
  double quat_error = 0.0;
  double rotation_error = 0.0;
};

RunSummary summarize(const RunLog& log, const riccati::CostSpec& cost) {
  return {log.errors, evaluate_cost(log, cost), log.seed, log.max_quat_norm_error,
          log.max_rotation_error};
}

MetricsReport reduce(const std::vector<double>& times, const std::vector<RunSummary>& runs) {
  MetricsReport rep;
  rep.runs = runs.size();
  rep.times = times;
  const std::size_t points = times.size();
  const double n = static_cast<double>(runs.size());
  rep.variance.assign(points, Vec3::Zero());
  rep.stddev.assign(points, Vec3::Zero());
  rep.rmse.assign(points, Vec3::Zero());
  rep.mean_error.assign(points, Vec3::Zero());
  for (std::size_t k = 0; k < points; ++k) {
    Vec3 mean = Vec3::Zero();
    Vec3 sq = Vec3::Zero();
    for (const auto& r : runs) {
      mean += r.errors[k];
      sq += r.errors[k].cwiseAbs2();
    }
    mean /= n;
    Vec3 var = Vec3::Zero();
    for (const auto& r : runs) var += (r.errors[k] - mean).cwiseAbs2();
    var = runs.size() > 1 ? Vec3(var / (n - 1.0)) : Vec3::Zero();
    rep.mean_error[k] = mean;
    rep.variance[k] = var;
    rep.stddev[k] = var.cwiseSqrt();
    rep.rmse[k] = (sq / n).cwiseSqrt();
  }
  double cmean = 0.0;
  for (const auto& r : runs) {
    rep.costs.push_back(r.cost);
    rep.seeds.push_back(r.seed);
    cmean += r.cost;
    rep.max_quat_norm_error = std::max(rep.max_quat_norm_error, r.quat_error);
    rep.max_rotation_error = std::max(rep.max_rotation_error, r.rotation_error);
  }
  cmean /= n;
  double cvar = 0.0;
  for (const auto& r : runs) cvar += (r.cost - cmean) * (r.cost - cmean);
  rep.cost_mean = cmean;
  rep.cost_variance = runs.size() > 1 ? cvar / (n - 1.0) : 0.0;
  return rep;
}

template <bool Parallel>
MetricsReport monte_carlo_impl(const Scenario& s, const riccati::GainSchedule& gains) {
  s.validate();
  if (s.n_runs < 2) throw ConfigError("monte carlo needs at least 2 runs");
  const auto refs = reference_path(s, controller_noise(s).mean);
  const auto n_runs = static_cast<std::size_t>(s.n_runs);

  std::vector<RunSummary> summaries(n_runs);
  std::vector<std::string> failures(n_runs);
  std::optional<RunLog> first;
  auto body = [&](std::size_t i) {
    try {
      RunLog log = run(s, gains, i, refs);
      summaries[i] = summarize(log, s.cost);
      if (i == 0) first = std::move(log);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(n_runs); ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n_runs; ++i) body(i);
  }

  std::string failed;
  for (std::size_t i = 0; i < n_runs; ++i) {
    if (failures[i].empty()) continue;
    failed += fmt::format("{}{}", failed.empty() ? "" : ", ", run_seed(s.seed, i));
  }
  if (!failed.empty()) {
    const auto idx = static_cast<std::size_t>(
        std::find_if(failures.begin(), failures.end(), [](const auto& f) { return !f.empty(); }) -
        failures.begin());
    throw DivergenceError(fmt::format("monte carlo aborted; failed seeds: {} (first: {})", failed,
                                      failures[idx]));
  }

  std::vector<double> times(refs.size());
  for (std::size_t k = 0; k < refs.size(); ++k) times[k] = static_cast<double>(k) * s.dt;
  MetricsReport rep = reduce(times, summaries);
  rep.first_run = std::move(first);
  return rep;
}

}  // namespace

riccati::LinearSchedule linearize_along(const Scenario& s) {
  const Vec3 mean = controller_noise(s).mean;
  const std::size_t n = s.steps();
  riccati::LinearSchedule sched;
  sched.times.resize(n + 1);
  sched.A.resize(n + 1);
  sched.B.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * s.dt;
    const auto j = linearize_at(s, t, mean);
    sched.times[k] = t;
    sched.A[k] = j.A;
    sched.B[k] = j.B;
  }
  return sched;
}

dynamics::LinearModel hover_linear_model(const Scenario& s) {
  const NoiseStats noise = controller_noise(s);
  const auto j = linearize_at(s, s.trajectory.start_time(), noise.mean);
  dynamics::LinearModel model;
  model.A = j.A;
  model.B = j.B;
  model.W = noise.w;
  return model;
}

riccati::GainSchedule build_controller(const Scenario& s) {
  s.validate();
  const NoiseStats noise = controller_noise(s);
  switch (s.controller) {
    case ControllerKind::LqrInfinite: {
      const auto model = hover_linear_model(s);
      return riccati::GainSchedule::constant(
          riccati::solve_lqr(model.A, model.B, s.cost.Q, s.cost.R).K);
    }
    case ControllerKind::McvInfinite: {
      const auto model = hover_linear_model(s);
      const auto sol =
          riccati::mcv_infinite(model.A, model.B, model.G, model.W, s.cost, s.mcv_options);
      auto sched = riccati::GainSchedule::constant(sol.K);
      sched.M_traj = {sol.M};
      sched.H_traj = {sol.H};
      return sched;
    }
    case ControllerKind::LqrFinite:
      return riccati::lqr_finite(linearize_along(s), s.cost, s.trajectory.duration(), s.dt);
    case ControllerKind::McvFinite:
      return riccati::mcv_finite(linearize_along(s), dynamics::noise_injection(), noise.w, s.cost,
                                 s.trajectory.duration(), s.dt);
  }
  throw ConfigError("unknown controller kind");
}

RunLog simulate(const Scenario& s, const riccati::GainSchedule& gains, std::size_t run_index) {
  s.validate();
  return run(s, gains, run_index, reference_path(s, controller_noise(s).mean));
}

double evaluate_cost(const RunLog& log, const riccati::CostSpec& cost) {
  const std::size_t n = log.times.size();
  if (n == 0) return 0.0;
  const InputVec u_nom = log.nominal_input.flat();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const VectorXd e = log.states[k].flat() - log.references[k].flat();
    const VectorXd du = log.inputs[k].flat() - u_nom;
    const double dt = log.times[k + 1] - log.times[k];
    total += (e.dot(cost.Q * e) + du.dot(cost.R * du)) * dt;
  }
  if (cost.Qf.size() > 0) {
    const VectorXd e = log.states[n - 1].flat() - log.references[n - 1].flat();
    total += e.dot(cost.Qf * e);
  }
  return total;
}

Vec3 MetricsReport::average_variance() const {
  Vec3 acc = Vec3::Zero();
  for (const auto& v : variance) acc += v;
  return variance.empty() ? acc : Vec3(acc / static_cast<double>(variance.size()));
}

Vec3 MetricsReport::average_rmse() const {
  Vec3 acc = Vec3::Zero();
  for (const auto& v : rmse) acc += v;
  return rmse.empty() ? acc : Vec3(acc / static_cast<double>(rmse.size()));
}

MetricsReport aggregate(std::span<const RunLog> logs, const riccati::CostSpec& cost) {
  if (logs.empty()) throw ConfigError("aggregate needs at least one run");
  std::vector<RunSummary> summaries;
  summaries.reserve(logs.size());
  for (const auto& log : logs) {
    if (log.times.size() != logs.front().times.size()) {
      throw ConfigError("runs have different lengths");
    }
    summaries.push_back(summarize(log, cost));
  }
  MetricsReport rep = reduce(logs.front().times, summaries);
  rep.first_run = logs.front();
  return rep;
}

MetricsReport monte_carlo(const Scenario& scenario, const riccati::GainSchedule& gains) {
  return monte_carlo_impl<true>(scenario, gains);
}

MetricsReport monte_carlo_serial(const Scenario& scenario, const riccati::GainSchedule& gains) {
  return monte_carlo_impl<false>(scenario, gains);
}

std::vector<SweepEntry> gamma_sweep(const Scenario& scenario, std::span<const double> gammas) {
  std::vector<SweepEntry> out;
  double previous = -1.0;
  for (double g : gammas) {
    if (!(g >= 0.0) || g < previous) {
      throw ConfigError("gamma values must be >= 0 and increasing");
    }
    previous = g;
    Scenario s = scenario;
    s.cost.gamma = g;
    SweepEntry entry;
    entry.gamma = g;
    entry.gains = build_controller(s);
    entry.metrics = monte_carlo(s, entry.gains);
    out.push_back(std::move(entry));
  }
  return out;
}

void write_runlog_csv(std::ostream& out, const RunLog& log) {
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,"
         "px_ref,py_ref,pz_ref,qw_ref,qx_ref,qy_ref,qz_ref,vx_ref,vy_ref,vz_ref,"
         "omega_x,omega_y,omega_z,thrust,ex,ey,ez\n";
  for (std::size_t k = 0; k < log.times.size(); ++k) {
    std::string row = fmt::format("{:.10g}", log.times[k]);
    auto put = [&row](double v) { row += fmt::format(",{:.10g}", v); };
    const StateVec x = log.states[k].flat();
    for (int i = 0; i < kStateDim; ++i) put(x[i]);
    for (int i = 0; i < 3; ++i) put(log.winds[k][i]);
    const StateVec r = log.references[k].flat();
    for (int i = 0; i < kStateDim; ++i) put(r[i]);
    const InputVec u = log.inputs[k].flat();
    for (int i = 0; i < kInputDim; ++i) put(u[i]);
    for (int i = 0; i < 3; ++i) put(log.errors[k][i]);
    out << row << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const MetricsReport& rep) {
  out << "index,t,var_x,var_y,var_z,std_x,std_y,std_z,rmse_x,rmse_y,rmse_z,"
         "mean_err_x,mean_err_y,mean_err_z\n";
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const Vec3& v = rep.variance[k];
    const Vec3& s = rep.stddev[k];
    const Vec3& r = rep.rmse[k];
    const Vec3& m = rep.mean_error[k];
    out << fmt::format(
        "{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},"
        "{:.10g},{:.10g},{:.10g}\n",
        k, rep.times[k], v.x(), v.y(), v.z(), s.x(), s.y(), s.z(), r.x(), r.y(), r.z(), m.x(),
        m.y(), m.z());
  }
}

void write_matrix_series_csv(std::ostream& out, const std::string& name,
                             const std::vector<double>& times,
                             const std::vector<MatrixXd>& series) {
  if (series.empty()) return;
  const auto rows = series.front().rows();
  const auto cols = series.front().cols();
  std::string header = "t";
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) header += fmt::format(",{}_{}_{}", name, i, j);
  }
  out << header << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::string row = fmt::format("{:.10g}", k < times.size() ? times[k] : 0.0);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) row += fmt::format(",{:.12g}", series[k](i, j));
    }
    out << row << '\n';
  }
}

}  // namespace quadmcv::sim
