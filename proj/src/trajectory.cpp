#include "quadmcv/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::trajectory {

// Segment coefficients are stored in normalized time s = tau / duration, which
// keeps the constraint system well scaled for multi-second segments.

namespace {

constexpr int kN = kPolyOrder + 1;
constexpr double kTimeTolerance = 1e-9;

// d^r/ds^r of s^i evaluated at s, for all i.
Eigen::Matrix<double, 1, kN> basis_row(double s, int r) {
  Eigen::Matrix<double, 1, kN> row = Eigen::Matrix<double, 1, kN>::Zero();
  for (int i = r; i < kN; ++i) {
    double factor = 1.0;
    for (int k = 0; k < r; ++k) factor *= static_cast<double>(i - k);
    row[i] = factor * std::pow(s, i - r);
  }
  return row;
}

// Gram matrix of the 4th derivative on [0, 1].
Eigen::Matrix<double, kN, kN> snap_gram() {
  Eigen::Matrix<double, kN, kN> q = Eigen::Matrix<double, kN, kN>::Zero();
  for (int i = 4; i < kN; ++i) {
    for (int l = 4; l < kN; ++l) {
      const double fi = static_cast<double>(i * (i - 1) * (i - 2) * (i - 3));
      const double fl = static_cast<double>(l * (l - 1) * (l - 2) * (l - 3));
      q(i, l) = fi * fl / static_cast<double>(i + l - 7);
    }
  }
  return q;
}

}  // namespace

PolyTrajectory::PolyTrajectory(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw DegenerateWaypointsError("trajectory has no segments");
  for (const auto& s : segments_) {
    if (!(s.duration > 0.0)) throw DegenerateWaypointsError("segment duration must be positive");
  }
}

double PolyTrajectory::start_time() const { return segments_.front().start; }

double PolyTrajectory::end_time() const {
  return segments_.back().start + segments_.back().duration;
}

std::size_t PolyTrajectory::locate(double t) const {
  if (segments_.empty()) throw OutOfRangeError("sampling an empty trajectory");
  if (!(t >= start_time() - kTimeTolerance && t <= end_time() + kTimeTolerance)) {
    throw OutOfRangeError(fmt::format("trajectory sample at t={} outside [{}, {}]", t,
                                      start_time(), end_time()));
  }
  for (std::size_t j = 0; j + 1 < segments_.size(); ++j) {
    if (t < segments_[j].start + segments_[j].duration) return j;
  }
  return segments_.size() - 1;
}

Vec3 PolyTrajectory::derivative_in_segment(std::size_t segment, double tau, int order) const {
  const Segment& seg = segments_.at(segment);
  if (order < 0 || order > kPolyOrder) return Vec3::Zero();
  const double s = std::clamp(tau / seg.duration, 0.0, 1.0);
  const double scale = std::pow(seg.duration, -order);
  Vec3 out;
  for (int axis = 0; axis < 3; ++axis) {
    // Horner on the derivative polynomial.
    const Coeffs& c = seg.coeffs[axis];
    double acc = 0.0;
    for (int i = kPolyOrder; i >= order; --i) {
      double factor = 1.0;
      for (int k = 0; k < order; ++k) factor *= static_cast<double>(i - k);
      acc = acc * s + factor * c[i];
    }
    out[axis] = acc * scale;
  }
  return out;
}

Vec3 PolyTrajectory::derivative(double t, int order) const {
  const std::size_t j = locate(t);
  return derivative_in_segment(j, t - segments_[j].start, order);
}

TrajectorySample PolyTrajectory::sample(double t) const {
  const std::size_t j = locate(t);
  const double tau = t - segments_[j].start;
  return {derivative_in_segment(j, tau, 0), derivative_in_segment(j, tau, 1)};
}

PolyTrajectory min_snap(std::span<const Waypoint> waypoints, bool rest_to_rest) {
  if (waypoints.size() < 2) throw DegenerateWaypointsError("min_snap needs at least 2 waypoints");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!waypoints[i].position.allFinite() || !std::isfinite(waypoints[i].time)) {
      throw DegenerateWaypointsError(fmt::format("waypoint {} is not finite", i));
    }
    if (i > 0 && !(waypoints[i].time > waypoints[i - 1].time)) {
      throw DegenerateWaypointsError(
          fmt::format("waypoint times must be strictly increasing (waypoint {})", i));
    }
  }

  const int segs = static_cast<int>(waypoints.size()) - 1;
  const int unknowns = kN * segs;
  const int end_rows = rest_to_rest ? 3 : 0;
  const int rows = 2 * segs + 3 + end_rows + 3 * (segs - 1);

  std::vector<double> durations(static_cast<std::size_t>(segs));
  for (int j = 0; j < segs; ++j) {
    durations[j] = waypoints[j + 1].time - waypoints[j].time;
  }

  MatrixXd cost = MatrixXd::Zero(unknowns, unknowns);
  const auto gram = snap_gram();
  for (int j = 0; j < segs; ++j) {
    cost.block<kN, kN>(kN * j, kN * j) = gram * std::pow(durations[j], -7.0);
  }

  MatrixXd cons = MatrixXd::Zero(rows, unknowns);
  MatrixXd rhs = MatrixXd::Zero(rows, 3);
  int row = 0;
  for (int j = 0; j < segs; ++j) {
    cons.block<1, kN>(row, kN * j) = basis_row(0.0, 0);
    rhs.row(row++) = waypoints[j].position.transpose();
    cons.block<1, kN>(row, kN * j) = basis_row(1.0, 0);
    rhs.row(row++) = waypoints[j + 1].position.transpose();
  }
  for (int r = 1; r <= 3; ++r) {
    cons.block<1, kN>(row++, 0) = basis_row(0.0, r) * std::pow(durations[0], -r);
  }
  if (rest_to_rest) {
    const int last = segs - 1;
    for (int r = 1; r <= 3; ++r) {
      cons.block<1, kN>(row++, kN * last) = basis_row(1.0, r) * std::pow(durations[last], -r);
    }
  }
  for (int j = 0; j + 1 < segs; ++j) {
    for (int r = 1; r <= 3; ++r) {
      cons.block<1, kN>(row, kN * j) = basis_row(1.0, r) * std::pow(durations[j], -r);
      cons.block<1, kN>(row, kN * (j + 1)) = -basis_row(0.0, r) * std::pow(durations[j + 1], -r);
      ++row;
    }
  }

  // [2C A^T; A 0] [c; lambda] = [0; b]
  const int dim = unknowns + rows;
  MatrixXd kkt = MatrixXd::Zero(dim, dim);
  kkt.topLeftCorner(unknowns, unknowns) = 2.0 * cost;
  kkt.topRightCorner(unknowns, rows) = cons.transpose();
  kkt.bottomLeftCorner(rows, unknowns) = cons;
  MatrixXd b = MatrixXd::Zero(dim, 3);
  b.bottomRows(rows) = rhs;

  const Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    throw DegenerateWaypointsError("minimum snap constraint system is singular");
  }
  const MatrixXd sol = lu.solve(b);

  std::vector<Segment> segments(static_cast<std::size_t>(segs));
  for (int j = 0; j < segs; ++j) {
    segments[j].start = waypoints[j].time;
    segments[j].duration = durations[j];
    for (int axis = 0; axis < 3; ++axis) {
      segments[j].coeffs[axis] = sol.block<kN, 1>(kN * j, axis);
    }
  }
  return PolyTrajectory(std::move(segments));
}

PolyTrajectory hover(const Vec3& p, double duration) {
  if (!(duration > 0.0)) throw DegenerateWaypointsError("hover duration must be positive");
  Segment seg;
  seg.start = 0.0;
  seg.duration = duration;
  for (int axis = 0; axis < 3; ++axis) {
    seg.coeffs[axis] = Coeffs::Zero();
    seg.coeffs[axis][0] = p[axis];
  }
  return PolyTrajectory({seg});
}

dynamics::State reference_state(const PolyTrajectory& traj, double t, const Vec3& v_w_mean) {
  const TrajectorySample s = traj.sample(t);
  dynamics::State x;
  x.p = s.position;
  x.q = Vec4(1.0, 0.0, 0.0, 0.0);
  x.v = s.velocity - v_w_mean;
  return x;
}

std::vector<Waypoint> default_line_waypoints() {
  return {{Vec3(0.0, 0.0, 4.0), 0.0}, {Vec3(5.0, 0.0, 4.0), 10.0}};
}

std::vector<Waypoint> default_circuit_waypoints() {
  return {{Vec3(0.0, 0.0, 0.0), 0.0},
          {Vec3(1.0, 0.0, 4.0), 5.0},
          {Vec3(4.0, 0.0, 4.0), 10.0},
          {Vec3(4.0, 3.0, 4.0), 15.0},
          {Vec3(1.0, 3.0, 4.0), 20.0}};
}

}  // namespace quadmcv::trajectory
