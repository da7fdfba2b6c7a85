#pragma once

#include <vector>

#include "quadmcv/types.hpp"

namespace quadmcv::riccati {

/// Quadratic cost weights and the variance weight gamma.
struct CostSpec {
  MatrixXd Q;
  MatrixXd R;
  MatrixXd Qf;
  double gamma = 0.0;

  /// Throws ConfigError on asymmetry (> 1e-12), non-PSD Q/Qf, R with
  /// min eigenvalue <= 1e-10, or negative gamma. Qf may be empty.
  void validate() const;
};

/// Largest real part of the spectrum.
double spectral_abscissa(const MatrixXd& a);
bool is_hurwitz(const MatrixXd& a);

/// Solves A^T X + X A + Q_bar = 0 (complex Schur, Bartels–Stewart).
/// Throws InstabilityError if A is not Hurwitz.
MatrixXd solve_lyapunov(const MatrixXd& a_cl, const MatrixXd& q_bar);

struct LqrSolution {
  MatrixXd M;
  MatrixXd K;
  int iterations = 0;
};

/// Stabilizing ARE solution by Kleinman–Newton iteration, K = -R^-1 B^T M.
LqrSolution solve_lqr(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                      const MatrixXd& r);

/// A gain K0 with A + B K0 Hurwitz. Zero when A is already Hurwitz; otherwise
/// the Riccati differential equation is integrated backward from M = Q to
/// stationarity. Throws UnstabilizableError.
MatrixXd initial_stabilizing_gain(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                                  const MatrixXd& r);

struct CareResiduals {
  double r1 = 0.0;
  double r2 = 0.0;
};

/// Frobenius norms of the two coupled algebraic Riccati equations.
CareResiduals care_residuals(const MatrixXd& a, const MatrixXd& b, const MatrixXd& g,
                             const MatrixXd& w, const CostSpec& cost, const MatrixXd& m,
                             const MatrixXd& h);

struct McvSolution {
  MatrixXd M;
  MatrixXd H;
  MatrixXd K;
  int iterations = 0;
  /// sigma = |K_{k+1} - K_k| / |K_k| per iteration.
  std::vector<double> sigma_history;
  CareResiduals residuals;
};

struct McvOptions {
  double eps = 1e-9;
  int max_iter = 200;
};

/// Infinite-horizon minimum cost variance gain by policy iteration: two
/// Lyapunov solves per step, K <- -R^-1 B^T (M + gamma H), until sigma <= eps.
/// Throws ConvergenceError or InstabilityError.
McvSolution mcv_infinite(const MatrixXd& a, const MatrixXd& b, const MatrixXd& g,
                         const MatrixXd& w, const CostSpec& cost, McvOptions options = {});

/// Time-varying (A, B) sampled on a uniform grid. Between knots the matrices
/// are linearly interpolated.
struct LinearSchedule {
  std::vector<double> times;
  std::vector<MatrixXd> A;
  std::vector<MatrixXd> B;

  MatrixXd a_at(double t) const;
  MatrixXd b_at(double t) const;
};

/// Feedback gains on a time grid. A single knot means a constant gain.
struct GainSchedule {
  std::vector<double> times;
  std::vector<MatrixXd> gains;
  std::vector<MatrixXd> M_traj;
  std::vector<MatrixXd> H_traj;

  /// Zero-order hold: gain of the last knot at or before t.
  const MatrixXd& gain_at(double t) const;
  /// Gain at knot index k, clamped to the last knot.
  const MatrixXd& gain_at_index(std::size_t k) const;

  static GainSchedule constant(const MatrixXd& k);
};

/// Finite-horizon minimum cost variance schedule: the coupled M/H Riccati ODEs
/// integrated backward from M(t_f) = Qf, H(t_f) = 0 with RK4 at step dt.
GainSchedule mcv_finite(const LinearSchedule& schedule, const MatrixXd& g, const MatrixXd& w,
                        const CostSpec& cost, double t_f, double dt);

/// Standard finite-horizon LQR Riccati sweep with the same grid and integrator.
GainSchedule lqr_finite(const LinearSchedule& schedule, const CostSpec& cost, double t_f,
                        double dt);

}  // namespace quadmcv::riccati
