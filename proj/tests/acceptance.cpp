// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "quadmcv/dynamics.hpp"
#include "quadmcv/errors.hpp"
#include "quadmcv/riccati.hpp"
#include "quadmcv/sim.hpp"
#include "quadmcv/trajectory.hpp"

#ifndef QUADMCV_CLI_PATH
#error "QUADMCV_CLI_PATH must point at the quadmcv executable"
#endif

using namespace quadmcv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

// Quaternion health accumulated over every in-process simulation below.
double worst_quat_error = 0.0;
double worst_rotation_error = 0.0;
int simulations_seen = 0;

void note_health(const sim::MetricsReport& r) {
  worst_quat_error = std::max(worst_quat_error, r.max_quat_norm_error);
  worst_rotation_error = std::max(worst_rotation_error, r.max_rotation_error);
  simulations_seen += static_cast<int>(r.runs);
}

void criterion(int id, const std::string& name, double budget_s,
               const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, fmt::format("threw: {}", e.what())};
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string timing = fmt::format("{:.2f} s", elapsed);
  if (budget_s > 0.0) {
    timing += fmt::format(" / {:g} s", budget_s);
    if (elapsed >= budget_s) {
      out.pass = false;
      out.detail += "; over time budget";
    }
  }
  if (!out.pass) ++failures;
  fmt::print("[{}] {:2d} {} | {} | {}\n", out.pass ? "PASS" : "FAIL", id, name, out.detail,
             timing);
  std::fflush(stdout);
}

// ---- oracles -------------------------------------------------------------

dynamics::Jacobians central_difference(const dynamics::State& x, const dynamics::Input& u,
                                       const Vec3& v_w, const dynamics::Params& params) {
  dynamics::Jacobians j;
  const StateVec x0 = x.flat();
  const InputVec u0 = u.flat();
  for (int i = 0; i < kStateDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0[i]));
    StateVec xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    j.A.col(i) = (dynamics::derivative(dynamics::State::from_flat(xp), u, v_w, params) -
                  dynamics::derivative(dynamics::State::from_flat(xm), u, v_w, params)) /
                 (2 * h);
  }
  for (int i = 0; i < kInputDim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u0[i]));
    InputVec up = u0, um = u0;
    up[i] += h;
    um[i] -= h;
    j.B.col(i) = (dynamics::derivative(x, dynamics::Input::from_flat(up), v_w, params) -
                  dynamics::derivative(x, dynamics::Input::from_flat(um), v_w, params)) /
                 (2 * h);
  }
  return j;
}

// vec(A^T X + X A) = (I kron A^T + A^T kron I) vec(X)
MatrixXd kronecker_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  const Eigen::Index n = a.rows();
  const MatrixXd id = MatrixXd::Identity(n, n);
  MatrixXd big = MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      big.block(i * n, j * n, n, n) += id(i, j) * a.transpose();
      big.block(i * n, j * n, n, n) += a(j, i) * id;
    }
  }
  const VectorXd rhs = -Eigen::Map<const VectorXd>(q.data(), n * n);
  const VectorXd x = big.fullPivLu().solve(rhs);
  return Eigen::Map<const MatrixXd>(x.data(), n, n);
}

// Scalar CAREs for A=0, B=G=W=Q=R=1:
//   1 + s^2 - 2 s M = 0,  4 M^2 - 2 s H = 0,  s = M + gamma H, K = -s.
// For a given M > 0 the second equation fixes H > 0; bisect the first on M.
struct ScalarCare {
  double M, H, K;
};

ScalarCare scalar_care_oracle(double gamma) {
  auto h_of = [gamma](double m) {
    return (-m + std::sqrt(m * m + 8.0 * gamma * m * m)) / (2.0 * gamma);
  };
  auto f = [&](double m) {
    const double s = m + gamma * h_of(m);
    return 1.0 + s * s - 2.0 * s * m;
  };
  // Scan for the first sign change, then bisect it down to rounding.
  double lo = 1e-6, hi = lo;
  const double f0 = f(lo);
  for (double m = lo; m < 100.0; m += 1e-3) {
    if ((f(m) > 0) != (f0 > 0)) {
      hi = m;
      break;
    }
    lo = m;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) > 0) == (f(lo) > 0)) lo = mid; else hi = mid;
  }
  const double m = 0.5 * (lo + hi);
  const double h = h_of(m);
  return {m, h, -(m + gamma * h)};
}

// One-sided P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n) {
  double p = 0.0;
  for (int i = k; i <= n; ++i) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                  n * std::log(2.0));
  }
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

constexpr double kGammas[] = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25};

}  // namespace

int main() {
  criterion(1, "Jacobian vs central differences", 5.0, [] {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const dynamics::Params params;
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
      dynamics::State x;
      x.p = 5.0 * Vec3(uni(rng), uni(rng), uni(rng));
      x.q = Vec4(normal(rng), normal(rng), normal(rng), normal(rng)).normalized();
      x.v = (0.1 + 2.45 * (1.0 + uni(rng))) *
            Vec3(normal(rng), normal(rng), normal(rng)).normalized();
      const dynamics::Input u{Vec3(uni(rng), uni(rng), uni(rng)), 9.81 + 4.0 * uni(rng)};
      const Vec3 v_w = 3.0 * Vec3(uni(rng), uni(rng), uni(rng));
      const auto an = dynamics::linearize(x, u, params, v_w);
      const auto fd = central_difference(x, u, v_w, params);
      const double scale = std::max({1.0, fd.A.cwiseAbs().maxCoeff(), fd.B.cwiseAbs().maxCoeff()});
      worst = std::max(worst, std::max(max_abs_diff(an.A, fd.A), max_abs_diff(an.B, fd.B)) / scale);
    }
    return Outcome{worst < 1e-5, fmt::format("max relative error {:.3e} (< 1e-5)", worst)};
  });

  criterion(2, "Lyapunov vs Kronecker solve", 5.0, [] {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 10);
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      const int n = dim(rng);
      MatrixXd a(n, n), c(n, n);
      for (int i = 0; i < n * n; ++i) {
        a.data()[i] = normal(rng) / std::sqrt(double(n));
        c.data()[i] = normal(rng);
      }
      a -= (riccati::spectral_abscissa(a) + 0.5) * MatrixXd::Identity(n, n);
      const MatrixXd q = c * c.transpose();
      worst = std::max(worst, (riccati::solve_lyapunov(a, q) - kronecker_lyapunov(a, q)).norm());
    }
    return Outcome{worst < 1e-9, fmt::format("max Frobenius error {:.3e} (< 1e-9)", worst)};
  });

  criterion(3, "CARE residuals on hover", 10.0, [] {
    bool ok = true;
    std::string detail;
    for (double gamma : {0.25, 0.75, 1.25}) {
      const auto s = sim::hover_scenario(gamma);
      const auto m = sim::hover_linear_model(s);
      const auto sol = riccati::mcv_infinite(m.A, m.B, m.G, m.W, s.cost);
      const auto r = riccati::care_residuals(m.A, m.B, m.G, m.W, s.cost, sol.M, sol.H);
      const double tol = 1e-6 * (1.0 + s.cost.Q.norm());
      const double abscissa = riccati::spectral_abscissa(m.A + m.B * sol.K);
      ok = ok && r.r1 < tol && r.r2 < tol && abscissa < 0.0;
      detail += fmt::format("g={:g}: r1={:.2e} r2={:.2e} abscissa={:.3f}; ", gamma, r.r1, r.r2,
                            abscissa);
    }
    return Outcome{ok, detail + fmt::format("tol {:.2e}", 1e-6 * (1.0 + sim::default_cost().Q.norm()))};
  });

  criterion(4, "gamma=0 and W=0 reductions", 0.0, [] {
    const auto hover = sim::hover_scenario(0.0);
    const auto m = sim::hover_linear_model(hover);
    const auto lqr = riccati::solve_lqr(m.A, m.B, hover.cost.Q, hover.cost.R);

    riccati::CostSpec g0 = hover.cost;
    g0.gamma = 0.0;
    const double inf_g0 = max_abs_diff(riccati::mcv_infinite(m.A, m.B, m.G, m.W, g0).K, lqr.K);
    riccati::CostSpec g125 = hover.cost;
    g125.gamma = 1.25;
    const double inf_w0 =
        max_abs_diff(riccati::mcv_infinite(m.A, m.B, m.G, Mat3::Zero(), g125).K, lqr.K);

    auto line = sim::tracking_scenario(trajectory::default_line_waypoints(), 0.75);
    const auto sched = sim::linearize_along(line);
    const double tf = line.trajectory.end_time();
    const auto lqr_sweep = riccati::lqr_finite(sched, line.cost, tf, line.dt);
    const auto w0 = riccati::mcv_finite(sched, m.G, Mat3::Zero(), line.cost, tf, line.dt);
    riccati::CostSpec line_g0 = line.cost;
    line_g0.gamma = 0.0;
    const auto fg0 = riccati::mcv_finite(sched, m.G, m.W, line_g0, tf, line.dt);
    double fin_w0 = 0.0, fin_g0 = 0.0, h_max = 0.0;
    for (std::size_t k = 0; k < lqr_sweep.gains.size(); ++k) {
      fin_w0 = std::max(fin_w0, max_abs_diff(w0.gains[k], lqr_sweep.gains[k]));
      fin_g0 = std::max(fin_g0, max_abs_diff(fg0.gains[k], lqr_sweep.gains[k]));
      h_max = std::max(h_max, w0.H_traj[k].norm());
    }
    const bool ok = inf_g0 < 1e-8 && inf_w0 < 1e-8 && fin_w0 < 1e-8 && fin_g0 < 1e-8 &&
                    h_max < 1e-10;
    return Outcome{ok, fmt::format("infinite |dK| g=0 {:.1e}, W=0 {:.1e}; finite |dK| g=0 {:.1e}, "
                                   "W=0 {:.1e}, max |H| {:.1e}",
                                   inf_g0, inf_w0, fin_g0, fin_w0, h_max)};
  });

  criterion(5, "scalar MCV vs brute-force root", 0.0, [] {
    const MatrixXd one = MatrixXd::Ones(1, 1);
    riccati::CostSpec cost{one, one, MatrixXd(), 0.5};
    const auto sol = riccati::mcv_infinite(MatrixXd::Zero(1, 1), one, one, one, cost);
    const auto ref = scalar_care_oracle(0.5);
    const double err = std::max({std::abs(sol.M(0, 0) - ref.M), std::abs(sol.H(0, 0) - ref.H),
                                 std::abs(sol.K(0, 0) - ref.K)});
    return Outcome{err < 1e-8, fmt::format("M={:.10f} H={:.10f} K={:.10f}, max error {:.2e}",
                                           sol.M(0, 0), sol.H(0, 0), sol.K(0, 0), err)};
  });

  criterion(6, "finite horizon approaches the steady state", 30.0, [] {
    const auto s = sim::hover_scenario(0.75);
    const auto m = sim::hover_linear_model(s);
    const double tf = 30.0;
    riccati::LinearSchedule sched;
    const auto n = static_cast<std::size_t>(std::llround(tf / s.dt));
    for (std::size_t k = 0; k <= n; ++k) {
      sched.times.push_back(k * s.dt);
      sched.A.push_back(m.A);
      sched.B.push_back(m.B);
    }
    const auto fin = riccati::mcv_finite(sched, m.G, m.W, s.cost, tf, s.dt);
    const auto inf = riccati::mcv_infinite(m.A, m.B, m.G, m.W, s.cost);
    const double rel = (fin.gains.front() - inf.K).norm() / inf.K.norm();
    return Outcome{rel < 1e-3, fmt::format("|K(0) - K_inf| / |K_inf| = {:.3e} (< 1e-3)", rel)};
  });

  criterion(7, "hover variance decreases with gamma", 300.0, [] {
    auto s = sim::hover_scenario(0.0);
    s.n_runs = 50;
    const auto sweep = sim::gamma_sweep(s, kGammas);
    bool monotone = true;
    std::string vx, vy;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      note_health(sweep[i].metrics);
      const Vec3 v = sweep[i].metrics.average_variance();
      vx += fmt::format("{}{:.4f}", i ? "," : "", v.x());
      vy += fmt::format("{}{:.4f}", i ? "," : "", v.y());
      if (i > 0) {
        const Vec3 prev = sweep[i - 1].metrics.average_variance();
        monotone = monotone && v.x() <= 1.05 * prev.x() && v.y() <= 1.05 * prev.y();
      }
    }
    const Vec3 first = sweep.front().metrics.average_variance();
    const Vec3 last = sweep.back().metrics.average_variance();
    const double rx = last.x() / first.x(), ry = last.y() / first.y();
    const bool ok = monotone && rx < 0.6 && ry < 0.6;
    return Outcome{ok, fmt::format("var_x [{}], var_y [{}]; non-increasing within 5%: {}; "
                                   "g=1.25/g=0: x {:.1f}%, y {:.1f}% (< 60%)",
                                   vx, vy, monotone ? "yes" : "no", 100 * rx, 100 * ry)};
  });

  // Informational: the same sweep with the literal covariance diag(0.5, 0.3, 0.05).
  {
    auto s = sim::hover_scenario(0.0);
    s.n_runs = 50;
    s.wind = wind::GaussianSource{{sim::default_wind_model().mean,
                                   Vec3(0.5, 0.3, 0.05).asDiagonal()}};
    std::string line;
    for (double g : kGammas) {
      try {
        const auto e = sim::gamma_sweep(s, std::vector<double>{g});
        note_health(e.front().metrics);
        const Vec3 v = e.front().metrics.average_variance();
        line += fmt::format("g={:g}: var_x {:.4f} var_y {:.4f}; ", g, v.x(), v.y());
      } catch (const Error& e) {
        line += fmt::format("g={:g}: {}; ", g, e.what());
      }
    }
    fmt::print("[INFO]    hover sweep with covariance diag(0.5, 0.3, 0.05) | {}\n", line);
  }

  criterion(8, "line tracking: MCV variance below LQR", 300.0, [] {
    auto mcv = sim::tracking_scenario(trajectory::default_line_waypoints(), 0.75);
    mcv.n_runs = 50;
    auto lqr = mcv;
    lqr.controller = sim::ControllerKind::LqrFinite;
    const auto rm = sim::monte_carlo(mcv, sim::build_controller(mcv));
    const auto rl = sim::monte_carlo(lqr, sim::build_controller(lqr));
    note_health(rm);
    note_health(rl);
    const std::size_t n = rm.times.size();
    std::size_t below_x = 0, below_y = 0;
    double ratio_x = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      below_x += rm.variance[k].x() <= rl.variance[k].x();
      below_y += rm.variance[k].y() <= rl.variance[k].y();
      if (rm.variance[k].x() > 0.0) ratio_x = std::max(ratio_x, rl.variance[k].x() / rm.variance[k].x());
    }
    const double fx = double(below_x) / n, fy = double(below_y) / n;
    const bool ok = fx >= 0.9 && fy >= 0.9 && ratio_x >= 1.5;
    return Outcome{ok, fmt::format("MCV <= LQR at {:.1f}% (x), {:.1f}% (y) of {} points (>= 90%); "
                                   "max LQR/MCV ratio in x {:.3f} (>= 1.5)",
                                   100 * fx, 100 * fy, n, ratio_x)};
  });

  criterion(9, "hover objective E[J] + gamma Var[J]: MCV <= LQR", 0.0, [] {
    const double gamma = 1.25;
    auto mcv = sim::hover_scenario(gamma);
    mcv.n_runs = 50;
    auto lqr = mcv;
    lqr.controller = sim::ControllerKind::LqrInfinite;
    const auto rm = sim::monte_carlo(mcv, sim::build_controller(mcv));
    const auto rl = sim::monte_carlo(lqr, sim::build_controller(lqr));
    note_health(rm);
    note_health(rl);
    // Per-run terms whose average is exactly the sample objective.
    const double n = static_cast<double>(rm.costs.size());
    auto term = [&](const sim::MetricsReport& r, std::size_t i) {
      const double d = r.costs[i] - r.cost_mean;
      return r.costs[i] + gamma * d * d * n / (n - 1.0);
    };
    int wins = 0, nonzero = 0;
    for (std::size_t i = 0; i < rm.costs.size(); ++i) {
      const double diff = term(rl, i) - term(rm, i);
      if (diff != 0.0) ++nonzero;
      if (diff > 0.0) ++wins;
    }
    const double p = sign_test_p(wins, nonzero);
    const double om = rm.objective(gamma), ol = rl.objective(gamma);
    const bool ok = om <= ol && p < 0.05;
    return Outcome{ok, fmt::format("objective MCV {:.4f} vs LQR {:.4f}; MCV better in {}/{} "
                                   "pairs, sign test p = {:.2e} (< 0.05)",
                                   om, ol, wins, nonzero, p)};
  });

  criterion(10, "minimum snap closed form and circuit interpolation", 0.0, [] {
    const auto single = trajectory::min_snap(std::vector<trajectory::Waypoint>{
        {Vec3::Zero(), 0.0}, {Vec3(1, 0, 0), 1.0}});
    trajectory::Coeffs expected;
    expected << 0, 0, 0, 0, 35, -84, 70, -20;
    const double coeff_err = (single.segments()[0].coeffs[0] - expected).cwiseAbs().maxCoeff();
    const auto wp = trajectory::default_circuit_waypoints();
    const auto circuit = trajectory::min_snap(wp);
    double interp_err = 0.0;
    for (const auto& w : wp) interp_err = std::max(interp_err, (circuit.sample(w.time).position - w.position).norm());
    return Outcome{coeff_err < 1e-9 && interp_err < 1e-9,
                   fmt::format("coefficient error {:.1e}, waypoint error {:.1e} m over {} waypoints",
                               coeff_err, interp_err, wp.size())};
  });

  criterion(11, "track reruns are byte-identical", 0.0, [] {
    const fs::path root = fs::temp_directory_path() / "quadmcv_acceptance_determinism";
    fs::remove_all(root);
    for (const char* d : {"a", "b"}) {
      const std::string cmd = fmt::format("\"{}\" track --seed 11 --no-plots --out \"{}\" > /dev/null",
                                          QUADMCV_CLI_PATH, (root / d).string());
      if (std::system(cmd.c_str()) != 0) return Outcome{false, "track exited nonzero"};
    }
    int compared = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
      if (e.path().extension() != ".csv") continue;
      const fs::path other = root / "b" / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        return Outcome{false, fmt::format("{} differs", e.path().filename().string())};
      }
      ++compared;
    }
    return Outcome{compared > 0, fmt::format("{} CSV files identical", compared)};
  });

  criterion(12, "quaternion health", 0.0, [] {
    const bool ok = simulations_seen > 0 && worst_quat_error < 1e-9 && worst_rotation_error < 1e-10;
    return Outcome{ok, fmt::format("{} runs: max | |q| - 1 | {:.2e} (< 1e-9), max |R^T R - I| "
                                   "{:.2e} (< 1e-10)",
                                   simulations_seen, worst_quat_error, worst_rotation_error)};
  });

  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
