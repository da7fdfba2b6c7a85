#include "quadmcv/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::riccati {

namespace {

MatrixXd symmetrized(const MatrixXd& x) { return 0.5 * (x + x.transpose()); }

bool is_symmetric(const MatrixXd& x, double tol) {
  return x.rows() == x.cols() && (x - x.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const MatrixXd& x) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(x), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

MatrixXd inverse_spd(const MatrixXd& r) {
  const Eigen::LLT<MatrixXd> llt(symmetrized(r));
  if (llt.info() != Eigen::Success) throw NumericalError("input weight R is not positive definite");
  return llt.solve(MatrixXd::Identity(r.rows(), r.cols()));
}

void check_shapes(const MatrixXd& a, const MatrixXd& b, const CostSpec& cost) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || cost.Q.rows() != n || cost.Q.cols() != n ||
      cost.R.rows() != b.cols() || cost.R.cols() != b.cols()) {
    throw ConfigError(fmt::format(
        "inconsistent shapes: A {}x{}, B {}x{}, Q {}x{}, R {}x{}", a.rows(), a.cols(), b.rows(),
        b.cols(), cost.Q.rows(), cost.Q.cols(), cost.R.rows(), cost.R.cols()));
  }
}

}  // namespace

void CostSpec::validate() const {
  auto check_psd = [](const MatrixXd& x, const char* name) {
    if (!x.allFinite()) throw ConfigError(fmt::format("cost {} has non-finite entries", name));
    if (!is_symmetric(x, 1e-12)) throw ConfigError(fmt::format("cost {} is not symmetric", name));
    if (min_eigenvalue(x) < -1e-12) {
      throw ConfigError(fmt::format("cost {} is not positive semidefinite", name));
    }
  };
  check_psd(Q, "Q");
  check_psd(R, "R");
  if (min_eigenvalue(R) <= 1e-10) throw ConfigError("cost R is not positive definite");
  if (Qf.size() > 0) {
    check_psd(Qf, "Qf");
    if (Qf.rows() != Q.rows()) throw ConfigError("cost Qf and Q differ in size");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError(fmt::format("gamma must be finite and >= 0 (got {})", gamma));
  }
}

double spectral_abscissa(const MatrixXd& a) {
  const Eigen::EigenSolver<MatrixXd> eig(a, false);
  return eig.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& a) { return spectral_abscissa(a) < 0.0; }

MatrixXd solve_lyapunov(const MatrixXd& a_cl, const MatrixXd& q_bar) {
  using Complex = std::complex<double>;
  using MatrixXc = Eigen::MatrixXcd;
  const Eigen::Index n = a_cl.rows();
  if (a_cl.cols() != n || q_bar.rows() != n || q_bar.cols() != n) {
    throw ConfigError("solve_lyapunov: inconsistent shapes");
  }
  const double abscissa = spectral_abscissa(a_cl);
  if (!(abscissa < 0.0)) {
    throw InstabilityError(
        fmt::format("closed loop is not Hurwitz (max real part {:.6e})", abscissa), abscissa);
  }

  // A = U T U^H, so A^T X + X A + Q = 0 becomes T^H Y + Y T = -U^H Q U with
  // Y = U^H X U, solved column by column with forward substitution.
  const Eigen::ComplexSchur<MatrixXd> schur(a_cl);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const MatrixXc& u = schur.matrixU();
  const MatrixXc& t = schur.matrixT();
  const MatrixXc c = u.adjoint() * q_bar.cast<Complex>() * u;

  MatrixXc y = MatrixXc::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = -c.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= y.col(k) * t(k, j);
    for (Eigen::Index i = 0; i < n; ++i) {
      Complex acc = rhs(i);
      for (Eigen::Index l = 0; l < i; ++l) acc -= std::conj(t(l, i)) * y(l, j);
      const Complex denom = std::conj(t(i, i)) + t(j, j);
      if (std::abs(denom) == 0.0) throw NumericalError("singular Lyapunov operator");
      y(i, j) = acc / denom;
    }
  }
  const MatrixXd x = (u * y * u.adjoint()).real();
  if (!x.allFinite()) throw NumericalError("Lyapunov solution is not finite");
  return symmetrized(x);
}

MatrixXd initial_stabilizing_gain(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                                  const MatrixXd& r) {
  if (is_hurwitz(a)) return MatrixXd::Zero(b.cols(), a.rows());

  const MatrixXd r_inv = inverse_spd(r);
  const MatrixXd s = b * r_inv * b.transpose();
  auto rhs = [&](const MatrixXd& m) -> MatrixXd {
    return a.transpose() * m + m * a + q - m * s * m;
  };

  constexpr long kMaxSteps = 2'000'000;
  constexpr double kMaxNorm = 1e100;
  MatrixXd m = q;
  for (long step = 0; step < kMaxSteps; ++step) {
    const MatrixXd m_dot = rhs(m);
    const double m_norm = m.norm();
    if (m_norm > 0.0 && m_dot.norm() / m_norm < 1e-9) break;
    // RK4 stays stable when h times the closed-loop spectral radius is small.
    const double rate = std::max((a - s * m).norm(), 1e-6);
    const double h = std::min(1.0, 0.5 / rate);
    const MatrixXd k1 = m_dot;
    const MatrixXd k2 = rhs(m + 0.5 * h * k1);
    const MatrixXd k3 = rhs(m + 0.5 * h * k2);
    const MatrixXd k4 = rhs(m + h * k3);
    m = symmetrized(m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (!m.allFinite() || m.norm() > kMaxNorm) {
      throw UnstabilizableError(
          "Riccati differential equation diverged; (A, B) is not stabilizable");
    }
    if (step + 1 == kMaxSteps) {
      throw UnstabilizableError("Riccati differential equation did not reach stationarity");
    }
  }
  MatrixXd k0 = -r_inv * b.transpose() * m;
  const double abscissa = spectral_abscissa(a + b * k0);
  if (!(abscissa < 0.0)) {
    throw UnstabilizableError(fmt::format(
        "stationary Riccati gain does not stabilize (max real part {:.6e})", abscissa));
  }
  return k0;
}

LqrSolution solve_lqr(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                      const MatrixXd& r) {
  const MatrixXd r_inv = inverse_spd(r);
  LqrSolution sol;
  sol.K = initial_stabilizing_gain(a, b, q, r);
  constexpr int kMaxIter = 100;
  std::vector<double> history;
  for (int it = 1; it <= kMaxIter; ++it) {
    const MatrixXd a_cl = a + b * sol.K;
    sol.M = solve_lyapunov(a_cl, q + sol.K.transpose() * r * sol.K);
    const MatrixXd k_next = -r_inv * b.transpose() * sol.M;
    const double change = (k_next - sol.K).norm() / std::max(1.0, sol.K.norm());
    history.push_back(change);
    sol.K = k_next;
    sol.iterations = it;
    if (change < 1e-13) return sol;
    if (!std::isfinite(change)) break;
  }
  // Accept a stalled iteration if the residual is already at round-off level.
  const MatrixXd res = a.transpose() * sol.M + sol.M * a + q -
                       sol.M * b * r_inv * b.transpose() * sol.M;
  if (res.norm() < 1e-9 * (1.0 + q.norm()) && is_hurwitz(a + b * sol.K)) return sol;
  throw ConvergenceError("Kleinman iteration did not converge", std::move(history));
}

CareResiduals care_residuals(const MatrixXd& a, const MatrixXd& b, const MatrixXd& g,
                             const MatrixXd& w, const CostSpec& cost, const MatrixXd& m,
                             const MatrixXd& h) {
  const MatrixXd s = b * inverse_spd(cost.R) * b.transpose();
  const double gm = cost.gamma;
  const MatrixXd e1 =
      a.transpose() * m + m * a + cost.Q - m * s * m + gm * gm * h * s * h;
  const MatrixXd e2 = a.transpose() * h + h * a - m * s * h - h * s * m - 2.0 * gm * h * s * h +
                      4.0 * m * g * w * g.transpose() * m;
  return {e1.norm(), e2.norm()};
}

McvSolution mcv_infinite(const MatrixXd& a, const MatrixXd& b, const MatrixXd& g,
                         const MatrixXd& w, const CostSpec& cost, McvOptions options) {
  cost.validate();
  check_shapes(a, b, cost);
  if (!(options.eps > 0.0)) throw ConfigError("mcv_infinite: eps must be positive");

  const MatrixXd r_inv = inverse_spd(cost.R);
  const MatrixXd noise = g * w * g.transpose();

  McvSolution sol;
  MatrixXd k = initial_stabilizing_gain(a, b, cost.Q, cost.R);
  for (int it = 1; it <= options.max_iter; ++it) {
    const MatrixXd a_cl = a + b * k;
    const double abscissa = spectral_abscissa(a_cl);
    if (!(abscissa < 0.0)) {
      throw InstabilityError(
          fmt::format("MCV iteration {} lost closed-loop stability (max real part {:.6e}); "
                      "gamma={} is too large for this system and noise",
                      it, abscissa, cost.gamma),
          abscissa);
    }
    sol.M = solve_lyapunov(a_cl, k.transpose() * cost.R * k + cost.Q);
    sol.H = solve_lyapunov(a_cl, 4.0 * sol.M * noise * sol.M);
    const MatrixXd k_next = -r_inv * b.transpose() * (sol.M + cost.gamma * sol.H);
    const double k_norm = k.norm();
    const double sigma = k_norm > 0.0 ? (k_next - k).norm() / k_norm : (k_next - k).norm();
    sol.sigma_history.push_back(sigma);
    k = k_next;
    sol.iterations = it;
    if (!std::isfinite(sigma)) break;
    if (sigma <= options.eps) {
      sol.K = k;
      sol.residuals = care_residuals(a, b, g, w, cost, sol.M, sol.H);
      const double abscissa_final = spectral_abscissa(a + b * sol.K);
      if (!(abscissa_final < 0.0)) {
        throw InstabilityError("converged MCV gain is not stabilizing", abscissa_final);
      }
      return sol;
    }
  }
  throw ConvergenceError(
      fmt::format("MCV iteration did not converge within {} iterations (last sigma {:.3e})",
                  options.max_iter,
                  sol.sigma_history.empty() ? 0.0 : sol.sigma_history.back()),
      sol.sigma_history);
}

namespace {

// Linear interpolation on a sorted knot vector, clamped at the ends.
MatrixXd interpolate(const std::vector<double>& times, const std::vector<MatrixXd>& values,
                     double t) {
  if (times.size() == 1 || t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double a = (t - times[lo]) / (times[hi] - times[lo]);
  return (1.0 - a) * values[lo] + a * values[hi];
}

std::size_t checked_grid(const LinearSchedule& schedule, double t_f, double dt) {
  if (!(dt > 0.0) || !(t_f > 0.0)) throw ConfigError("horizon and step must be positive");
  const double ratio = t_f / dt;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-6) {
    throw ConfigError(fmt::format("step {} does not divide horizon {}", dt, t_f));
  }
  if (schedule.times.size() != n + 1 || schedule.A.size() != n + 1 ||
      schedule.B.size() != n + 1) {
    throw ConfigError(fmt::format("linear schedule has {} knots, grid needs {}",
                                  schedule.times.size(), n + 1));
  }
  for (std::size_t k = 0; k <= n; ++k) {
    if (std::abs(schedule.times[k] - static_cast<double>(k) * dt) > 1e-9 * std::max(1.0, t_f)) {
      throw ConfigError(fmt::format("linear schedule knot {} is off the step grid", k));
    }
  }
  return n;
}

struct SweepState {
  MatrixXd M;
  MatrixXd H;
};

// Backward RK4 sweep of the coupled equations; with_variance=false drops H.
GainSchedule backward_sweep(const LinearSchedule& schedule, const MatrixXd& noise,
                            const CostSpec& cost, double t_f, double dt, bool with_variance) {
  cost.validate();
  if (cost.Qf.size() == 0) throw ConfigError("finite horizon requires a terminal weight Qf");
  const std::size_t n = checked_grid(schedule, t_f, dt);
  const MatrixXd r_inv = inverse_spd(cost.R);
  const double gm = cost.gamma;

  // d/dt of (M, H) at time t.
  auto rates = [&](const SweepState& x, double t) -> SweepState {
    const MatrixXd a = schedule.a_at(t);
    const MatrixXd b = schedule.b_at(t);
    const MatrixXd s = b * r_inv * b.transpose();
    SweepState d;
    d.M = -(a.transpose() * x.M + x.M * a + cost.Q - x.M * s * x.M);
    if (!with_variance) {
      d.H = MatrixXd::Zero(x.M.rows(), x.M.cols());
      return d;
    }
    const MatrixXd hsh = x.H * s * x.H;
    d.M -= gm * gm * hsh;
    d.H = -(a.transpose() * x.H + x.H * a + 4.0 * x.M * noise * x.M - x.M * s * x.H -
            x.H * s * x.M - 2.0 * gm * hsh);
    return d;
  };
  auto axpy = [](const SweepState& x, double h, const SweepState& d) {
    return SweepState{x.M + h * d.M, x.H + h * d.H};
  };

  GainSchedule out;
  out.times = schedule.times;
  out.M_traj.resize(n + 1);
  out.H_traj.resize(n + 1);
  out.gains.resize(n + 1);

  SweepState x{cost.Qf, MatrixXd::Zero(cost.Q.rows(), cost.Q.cols())};
  out.M_traj[n] = x.M;
  out.H_traj[n] = x.H;
  for (std::size_t k = n; k > 0; --k) {
    const double t = schedule.times[k];
    const double h = -(t - schedule.times[k - 1]);
    const SweepState k1 = rates(x, t);
    const SweepState k2 = rates(axpy(x, 0.5 * h, k1), t + 0.5 * h);
    const SweepState k3 = rates(axpy(x, 0.5 * h, k2), t + 0.5 * h);
    const SweepState k4 = rates(axpy(x, h, k3), t + h);
    x.M = symmetrized(x.M + (h / 6.0) * (k1.M + 2.0 * k2.M + 2.0 * k3.M + k4.M));
    x.H = symmetrized(x.H + (h / 6.0) * (k1.H + 2.0 * k2.H + 2.0 * k3.H + k4.H));
    if (!x.M.allFinite() || !x.H.allFinite()) {
      throw HorizonError(
          fmt::format("Riccati sweep blew up at t={:.4f} s; reduce horizon or weights",
                      schedule.times[k - 1]),
          schedule.times[k - 1]);
    }
    out.M_traj[k - 1] = x.M;
    out.H_traj[k - 1] = x.H;
  }
  for (std::size_t k = 0; k <= n; ++k) {
    out.gains[k] = -r_inv * schedule.B[k].transpose() * (out.M_traj[k] + gm * out.H_traj[k]);
  }
  if (!with_variance) out.H_traj.clear();
  return out;
}

}  // namespace

MatrixXd LinearSchedule::a_at(double t) const { return interpolate(times, A, t); }
MatrixXd LinearSchedule::b_at(double t) const { return interpolate(times, B, t); }

const MatrixXd& GainSchedule::gain_at(double t) const {
  if (gains.empty()) throw ConfigError("empty gain schedule");
  if (gains.size() == 1 || t <= times.front()) return gains.front();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto k = static_cast<std::size_t>(it - times.begin()) - 1;
  return gains[std::min(k, gains.size() - 1)];
}

const MatrixXd& GainSchedule::gain_at_index(std::size_t k) const {
  if (gains.empty()) throw ConfigError("empty gain schedule");
  return gains[std::min(k, gains.size() - 1)];
}

GainSchedule GainSchedule::constant(const MatrixXd& k) {
  GainSchedule s;
  s.times = {0.0};
  s.gains = {k};
  return s;
}

GainSchedule mcv_finite(const LinearSchedule& schedule, const MatrixXd& g, const MatrixXd& w,
                        const CostSpec& cost, double t_f, double dt) {
  return backward_sweep(schedule, g * w * g.transpose(), cost, t_f, dt, true);
}

GainSchedule lqr_finite(const LinearSchedule& schedule, const CostSpec& cost, double t_f,
                        double dt) {
  CostSpec lqr = cost;
  lqr.gamma = 0.0;
  return backward_sweep(schedule, MatrixXd(), lqr, t_f, dt, false);
}

}  // namespace quadmcv::riccati
