#include "quadmcv/app.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"
#include "quadmcv/plot.hpp"

namespace quadmcv::app {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

template <typename Writer>
void write_csv(const fs::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  plot::write_file(path, out.str());
}

void dump_gains(const fs::path& dir, const std::string& stem, const riccati::GainSchedule& g) {
  const std::vector<double> times = g.times.empty() ? std::vector<double>{0.0} : g.times;
  auto dump = [&](const std::string& name, const std::vector<MatrixXd>& series) {
    if (series.empty()) return;
    write_csv(dir / fmt::format("{}_{}.csv", stem, name), [&](std::ostream& out) {
      sim::write_matrix_series_csv(out, name, times, series);
    });
  };
  dump("K", g.gains);
  dump("M", g.M_traj);
  dump("H", g.H_traj);
}

const char* const kAxes[] = {"x", "y", "z"};

}  // namespace

std::string gamma_label(double gamma) { return fmt::format("{:g}", gamma); }

int cmd_hover(const config::Config& cfg, std::ostream& log) {
  if (cfg.trajectory != config::TrajectoryKind::Hover) {
    throw ConfigError("trajectory.type must be hover for the hover command");
  }
  ensure_dir(cfg.out_dir);
  const auto sweep = sim::gamma_sweep(cfg.scenario, cfg.gammas);

  for (const auto& e : sweep) {
    const std::string g = gamma_label(e.gamma);
    write_csv(cfg.out_dir / fmt::format("hover_metrics_g{}.csv", g),
              [&](std::ostream& out) { sim::write_metrics_csv(out, e.metrics); });
    write_csv(cfg.out_dir / fmt::format("hover_run0_g{}.csv", g),
              [&](std::ostream& out) { sim::write_runlog_csv(out, *e.metrics.first_run); });
    if (cfg.dump_matrices) dump_gains(cfg.out_dir, fmt::format("hover_g{}", g), e.gains);
  }
  const fs::path table = cfg.out_dir / "hover_sweep.csv";
  write_csv(table, [&](std::ostream& out) {
    out << "gamma,var_x,var_y,var_z,rmse_x,rmse_y,rmse_z,cost_mean,cost_variance,objective\n";
    for (const auto& e : sweep) {
      const Vec3 v = e.metrics.average_variance();
      const Vec3 r = e.metrics.average_rmse();
      out << fmt::format("{:g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n",
                         e.gamma, v.x(), v.y(), v.z(), r.x(), r.y(), r.z(), e.metrics.cost_mean,
                         e.metrics.cost_variance, e.metrics.objective(e.gamma));
    }
  });

  log << fmt::format("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}\n", "gamma", "var_x",
                     "var_y", "var_z", "rmse_x", "rmse_y", "rmse_z");
  for (const auto& e : sweep) {
    const Vec3 v = e.metrics.average_variance();
    const Vec3 r = e.metrics.average_rmse();
    log << fmt::format("{:>6g} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
                       e.gamma, v.x(), v.y(), v.z(), r.x(), r.y(), r.z());
  }

  if (cfg.plots) {
    std::vector<plot::LineChart> panels(3);
    for (int a = 0; a < 3; ++a) {
      panels[a].title = fmt::format("Hover position {} over time", kAxes[a]);
      panels[a].xlabel = "t [s]";
      panels[a].ylabel = fmt::format("p{} [m]", kAxes[a]);
    }
    for (const auto& e : sweep) {
      const std::string g = gamma_label(e.gamma);
      const auto run = plot::read_csv(cfg.out_dir / fmt::format("hover_run0_g{}.csv", g));
      const auto t = run.column("t");
      for (int a = 0; a < 3; ++a) {
        panels[a].series.push_back(
            {"gamma=" + g, t, run.column(fmt::format("p{}", kAxes[a]))});
      }
    }
    plot::write_file(cfg.out_dir / "hover_trajectory.svg", plot::render_svg(panels));

    const auto sweep_csv = plot::read_csv(table);
    const auto gammas = sweep_csv.column("gamma");
    for (const char* metric : {"var", "rmse"}) {
      plot::BarChart bars;
      bars.title = std::string(metric) == "var" ? "Position error variance vs gamma"
                                                : "Position RMSE vs gamma";
      bars.ylabel = std::string(metric) == "var" ? "variance [m^2]" : "RMSE [m]";
      for (double g : gammas) bars.categories.push_back(gamma_label(g));
      for (const char* axis : {"x", "y", "z"}) {
        bars.groups.push_back(axis);
        bars.values.push_back(sweep_csv.column(fmt::format("{}_{}", metric, axis)));
      }
      plot::write_file(cfg.out_dir / fmt::format("hover_{}.svg",
                                                 std::string(metric) == "var" ? "variance" : "rmse"),
                       plot::render_svg(bars));
    }
  }
  return 0;
}

int cmd_track(const config::Config& cfg, std::ostream& log) {
  if (cfg.trajectory == config::TrajectoryKind::Hover) {
    throw ConfigError("trajectory.type must be line, circuit or waypoints for the track command");
  }
  ensure_dir(cfg.out_dir);

  sim::Scenario mcv = cfg.scenario;
  mcv.controller = sim::ControllerKind::McvFinite;
  sim::Scenario lqr = cfg.scenario;
  lqr.controller = sim::ControllerKind::LqrFinite;
  const auto mcv_gains = sim::build_controller(mcv);
  const auto lqr_gains = sim::build_controller(lqr);
  const auto mcv_m = sim::monte_carlo(mcv, mcv_gains);
  const auto lqr_m = sim::monte_carlo(lqr, lqr_gains);

  const std::pair<const char*, const sim::MetricsReport*> reports[] = {{"mcv", &mcv_m},
                                                                        {"lqr", &lqr_m}};
  for (const auto& [name, m] : reports) {
    write_csv(cfg.out_dir / fmt::format("track_{}_metrics.csv", name),
              [&](std::ostream& out) { sim::write_metrics_csv(out, *m); });
    write_csv(cfg.out_dir / fmt::format("track_{}_run0.csv", name),
              [&](std::ostream& out) { sim::write_runlog_csv(out, *m->first_run); });
  }
  if (cfg.dump_matrices) {
    dump_gains(cfg.out_dir, "track_mcv", mcv_gains);
    dump_gains(cfg.out_dir, "track_lqr", lqr_gains);
  }
  write_csv(cfg.out_dir / "track_compare.csv", [&](std::ostream& out) {
    out << "t,var_x_mcv,var_x_lqr,var_y_mcv,var_y_lqr,var_z_mcv,var_z_lqr,"
           "rmse_x_mcv,rmse_x_lqr,rmse_y_mcv,rmse_y_lqr,rmse_z_mcv,rmse_z_lqr\n";
    for (std::size_t k = 0; k < mcv_m.times.size(); ++k) {
      std::string row = fmt::format("{:.10g}", mcv_m.times[k]);
      for (int a = 0; a < 3; ++a) {
        row += fmt::format(",{:.10g},{:.10g}", mcv_m.variance[k][a], lqr_m.variance[k][a]);
      }
      for (int a = 0; a < 3; ++a) {
        row += fmt::format(",{:.10g},{:.10g}", mcv_m.rmse[k][a], lqr_m.rmse[k][a]);
      }
      out << row << '\n';
    }
  });

  log << fmt::format("{} trajectory, gamma={:g}, {} runs\n", config::to_string(cfg.trajectory),
                     cfg.scenario.cost.gamma, cfg.scenario.n_runs);
  log << fmt::format("{:>4} {:>14} {:>14} {:>18} {:>16}\n", "axis", "mean var mcv",
                     "mean var lqr", "points mcv<=lqr", "max lqr/mcv");
  for (int a = 0; a < 3; ++a) {
    std::size_t better = 0;
    std::size_t counted = 0;
    double max_ratio = 0.0;
    for (std::size_t k = 1; k < mcv_m.times.size(); ++k) {
      const double vm = mcv_m.variance[k][a];
      const double vl = lqr_m.variance[k][a];
      ++counted;
      if (vm <= vl) ++better;
      if (vm > 0.0) max_ratio = std::max(max_ratio, vl / vm);
    }
    log << fmt::format("{:>4} {:>14.4e} {:>14.4e} {:>17.1f}% {:>16.3f}\n", kAxes[a],
                       mcv_m.average_variance()[a], lqr_m.average_variance()[a],
                       100.0 * static_cast<double>(better) / static_cast<double>(counted),
                       max_ratio);
  }

  if (cfg.plots) {
    const auto cmp = plot::read_csv(cfg.out_dir / "track_compare.csv");
    const auto t = cmp.column("t");
    for (const char* metric : {"var", "rmse"}) {
      std::vector<plot::LineChart> panels;
      for (const char* axis : kAxes) {
        plot::LineChart c;
        c.title = fmt::format("{} of {} error, MCV vs LQR",
                              std::string(metric) == "var" ? "Variance" : "RMSE", axis);
        c.xlabel = "t [s]";
        c.ylabel = std::string(metric) == "var" ? "variance [m^2]" : "RMSE [m]";
        c.series.push_back({"MCV", t, cmp.column(fmt::format("{}_{}_mcv", metric, axis))});
        c.series.push_back({"LQR", t, cmp.column(fmt::format("{}_{}_lqr", metric, axis))});
        panels.push_back(std::move(c));
      }
      plot::write_file(cfg.out_dir / fmt::format("track_{}.svg", std::string(metric) == "var"
                                                                     ? "variance"
                                                                     : "rmse"),
                       plot::render_svg(panels));
    }

    const auto run_m = plot::read_csv(cfg.out_dir / "track_mcv_run0.csv");
    const auto run_l = plot::read_csv(cfg.out_dir / "track_lqr_run0.csv");
    const auto tm = run_m.column("t");
    std::vector<plot::LineChart> pos;
    for (const char* axis : kAxes) {
      plot::LineChart c;
      c.title = fmt::format("Position {} (run 0)", axis);
      c.xlabel = "t [s]";
      c.ylabel = fmt::format("p{} [m]", axis);
      c.series.push_back({"reference", tm, run_m.column(fmt::format("p{}_ref", axis))});
      c.series.push_back({"MCV", tm, run_m.column(fmt::format("p{}", axis))});
      c.series.push_back({"LQR", run_l.column("t"), run_l.column(fmt::format("p{}", axis))});
      pos.push_back(std::move(c));
    }
    plot::write_file(cfg.out_dir / "track_trajectory.svg", plot::render_svg(pos));

    std::vector<plot::LineChart> inputs;
    for (const char* col : {"omega_x", "omega_y", "omega_z", "thrust"}) {
      plot::LineChart c;
      c.title = fmt::format("Input {} (run 0)", col);
      c.xlabel = "t [s]";
      c.ylabel = std::string(col) == "thrust" ? "thrust [N]" : "rate [rad/s]";
      c.series.push_back({"MCV", tm, run_m.column(col)});
      c.series.push_back({"LQR", run_l.column("t"), run_l.column(col)});
      inputs.push_back(std::move(c));
    }
    plot::write_file(cfg.out_dir / "track_inputs.svg", plot::render_svg(inputs));
  }
  return 0;
}

dynamics::Jacobians finite_difference_jacobians(const dynamics::State& x,
                                                const dynamics::Input& u, const Vec3& v_w,
                                                const dynamics::Params& params) {
  dynamics::Jacobians j;
  const StateVec x0 = x.flat();
  const InputVec u0 = u.flat();
  for (int i = 0; i < kStateDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0[i]));
    StateVec xp = x0;
    StateVec xm = x0;
    xp[i] += h;
    xm[i] -= h;
    j.A.col(i) = (dynamics::derivative(dynamics::State::from_flat(xp), u, v_w, params) -
                  dynamics::derivative(dynamics::State::from_flat(xm), u, v_w, params)) /
                 (2.0 * h);
  }
  for (int i = 0; i < kInputDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u0[i]));
    InputVec up = u0;
    InputVec um = u0;
    up[i] += h;
    um[i] -= h;
    j.B.col(i) = (dynamics::derivative(x, dynamics::Input::from_flat(up), v_w, params) -
                  dynamics::derivative(x, dynamics::Input::from_flat(um), v_w, params)) /
                 (2.0 * h);
  }
  return j;
}

std::vector<CheckRow> run_checks(const config::Config& cfg, const CheckOptions& options) {
  std::vector<CheckRow> rows;
  auto check = [&rows](const std::string& name, double threshold,
                       const std::function<double()>& body) {
    CheckRow row{name, std::numeric_limits<double>::quiet_NaN(), threshold, false, {}};
    try {
      row.value = body();
      row.pass = row.value < threshold;
    } catch (const std::exception& e) {
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  };

  const dynamics::Params& params = cfg.scenario.params;
  check("jacobian max relative error", 1e-5, [&] {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int n = 0; n < options.jacobian_samples; ++n) {
      dynamics::State x;
      x.p = 5.0 * Vec3(uni(rng), uni(rng), uni(rng));
      x.q = Vec4(normal(rng), normal(rng), normal(rng), normal(rng)).normalized();
      const Vec3 dir = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
      x.v = (0.1 + 4.9 * (0.5 + 0.5 * uni(rng))) * dir;
      dynamics::Input u;
      u.omega = Vec3(uni(rng), uni(rng), uni(rng));
      u.thrust = 10.0 + 5.0 * uni(rng);
      const Vec3 v_w = 3.0 * Vec3(uni(rng), uni(rng), uni(rng));
      auto analytic = dynamics::linearize(x, u, params, v_w);
      analytic.A.array() += options.jacobian_perturbation;
      const auto fd = finite_difference_jacobians(x, u, v_w, params);
      const double scale =
          std::max({1.0, fd.A.cwiseAbs().maxCoeff(), fd.B.cwiseAbs().maxCoeff()});
      const double diff = std::max((analytic.A - fd.A).cwiseAbs().maxCoeff(),
                                   (analytic.B - fd.B).cwiseAbs().maxCoeff());
      worst = std::max(worst, diff / scale);
    }
    return worst;
  });

  check("lyapunov relative residual", 1e-9, [&] {
    std::mt19937_64 rng(options.seed + 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> dim(2, 10);
    double worst = 0.0;
    for (int n = 0; n < options.lyapunov_samples; ++n) {
      const int d = dim(rng);
      MatrixXd a(d, d);
      MatrixXd c(d, d);
      for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
          a(i, k) = normal(rng);
          c(i, k) = normal(rng);
        }
      }
      a -= (riccati::spectral_abscissa(a) + 0.5) * MatrixXd::Identity(d, d);
      const MatrixXd q = c * c.transpose() + MatrixXd::Identity(d, d);
      const MatrixXd x = riccati::solve_lyapunov(a, q);
      const MatrixXd res = a.transpose() * x + x * a + q;
      worst = std::max(worst, res.norm() / q.norm());
    }
    return worst;
  });

  sim::Scenario hover = cfg.scenario;
  hover.trajectory = trajectory::hover(cfg.hover_point, 2.0);
  hover.x0 = trajectory::reference_state(hover.trajectory, 0.0, wind::statistics(hover.wind).mean);
  hover.controller = sim::ControllerKind::McvInfinite;
  const auto model = sim::hover_linear_model(hover);
  const double care_tol = 1e-6 * (1.0 + cfg.scenario.cost.Q.norm());

  for (double g : {0.25, 0.75, 1.25}) {
    riccati::CostSpec cost = cfg.scenario.cost;
    cost.gamma = g;
    std::optional<riccati::McvSolution> sol;
    check(fmt::format("CARE residual r1, gamma={:g}", g), care_tol, [&] {
      sol = riccati::mcv_infinite(model.A, model.B, model.G, model.W, cost,
                                  cfg.scenario.mcv_options);
      return sol->residuals.r1;
    });
    check(fmt::format("CARE residual r2, gamma={:g}", g), care_tol, [&] {
      if (!sol) throw SolverError("no MCV solution");
      return sol->residuals.r2;
    });
    check(fmt::format("closed-loop abscissa, gamma={:g}", g), 0.0, [&] {
      if (!sol) throw SolverError("no MCV solution");
      return riccati::spectral_abscissa(model.A + model.B * sol->K);
    });
  }

  const auto lqr = riccati::solve_lqr(model.A, model.B, cfg.scenario.cost.Q, cfg.scenario.cost.R);
  check("gamma=0 gain vs LQR", 1e-8, [&] {
    riccati::CostSpec cost = cfg.scenario.cost;
    cost.gamma = 0.0;
    const auto sol = riccati::mcv_infinite(model.A, model.B, model.G, model.W, cost,
                                           cfg.scenario.mcv_options);
    return (sol.K - lqr.K).norm();
  });
  check("W=0 gain vs LQR", 1e-8, [&] {
    riccati::CostSpec cost = cfg.scenario.cost;
    cost.gamma = 0.75;
    const auto sol = riccati::mcv_infinite(model.A, model.B, model.G, Mat3::Zero(), cost,
                                           cfg.scenario.mcv_options);
    return (sol.K - lqr.K).norm();
  });

  std::optional<riccati::GainSchedule> mcv_w0;
  check("finite horizon W=0 gains vs LQR sweep", 1e-8, [&] {
    riccati::CostSpec cost = cfg.scenario.cost;
    cost.gamma = 0.75;
    const auto sched = sim::linearize_along(hover);
    mcv_w0 = riccati::mcv_finite(sched, model.G, Mat3::Zero(), cost, 2.0, hover.dt);
    const auto ref = riccati::lqr_finite(sched, cost, 2.0, hover.dt);
    double worst = 0.0;
    for (std::size_t k = 0; k < ref.gains.size(); ++k) {
      worst = std::max(worst, (mcv_w0->gains[k] - ref.gains[k]).norm());
    }
    return worst;
  });
  check("finite horizon W=0 max |H|", 1e-10, [&] {
    if (!mcv_w0) throw SolverError("no finite-horizon schedule");
    double worst = 0.0;
    for (const auto& h : mcv_w0->H_traj) worst = std::max(worst, h.norm());
    return worst;
  });
  return rows;
}

int cmd_check(const config::Config& cfg, const CheckOptions& options, std::ostream& log) {
  const auto rows = run_checks(cfg, options);
  bool ok = true;
  log << fmt::format("{:<40} {:>12} {:>12}  {}\n", "check", "value", "threshold", "status");
  for (const auto& r : rows) {
    ok = ok && r.pass;
    log << fmt::format("{:<40} {:>12.3e} {:>12.3e}  {}{}\n", r.name, r.value, r.threshold,
                       r.pass ? "PASS" : "FAIL", r.note.empty() ? "" : "  (" + r.note + ")");
  }
  log << (ok ? "all checks passed\n" : "CHECK FAILED\n");
  return ok ? 0 : kCheckFailed;
}

int cmd_windstats(const fs::path& trace, const std::optional<fs::path>& out_dir,
                  std::ostream& log) {
  const auto data = wind::read_trace_csv(trace.string());
  const auto model = wind::estimate_stats(data);
  log << fmt::format("samples: {}\n", data.size());
  log << fmt::format("mean: [{:.6g}, {:.6g}, {:.6g}]\n", model.mean.x(), model.mean.y(),
                     model.mean.z());
  log << "covariance:\n";
  for (int i = 0; i < 3; ++i) {
    log << fmt::format("  [{:.6g}, {:.6g}, {:.6g}]\n", model.covariance(i, 0),
                       model.covariance(i, 1), model.covariance(i, 2));
  }
  if (out_dir) {
    ensure_dir(*out_dir);
    plot::write_file(*out_dir / "wind_model.ini", config::wind_section(model));
  }
  return 0;
}

}  // namespace quadmcv::app
