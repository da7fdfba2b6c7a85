#pragma once

#include <array>
#include <span>
#include <vector>

#include "quadmcv/dynamics.hpp"
#include "quadmcv/types.hpp"

namespace quadmcv::trajectory {

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double time = 0.0;
};

inline constexpr int kPolyOrder = 7;
using Coeffs = Eigen::Matrix<double, kPolyOrder + 1, 1>;

/// One polynomial piece per axis, in local time tau = t - start.
struct Segment {
  double start = 0.0;
  double duration = 0.0;
  std::array<Coeffs, 3> coeffs;
};

struct TrajectorySample {
  Vec3 position;
  Vec3 velocity;
};

/// Piecewise degree-7 position reference.
class PolyTrajectory {
 public:
  PolyTrajectory() = default;
  explicit PolyTrajectory(std::vector<Segment> segments);

  double start_time() const;
  double end_time() const;
  double duration() const { return end_time() - start_time(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  /// Position and velocity; OutOfRangeError outside [start, end].
  TrajectorySample sample(double t) const;

  /// d^order p / dt^order at t (order 0..7).
  Vec3 derivative(double t, int order) const;

  /// One-sided evaluation at a segment boundary, used for joint checks.
  Vec3 derivative_in_segment(std::size_t segment, double tau, int order) const;

 private:
  std::size_t locate(double t) const;

  std::vector<Segment> segments_;
};

/// Minimum snap through the waypoints: per axis, minimizes the integral of the
/// squared 4th derivative subject to interpolation, C3 joints, and zero
/// velocity/acceleration/jerk at the start (and at the end when rest_to_rest).
/// Throws DegenerateWaypointsError.
PolyTrajectory min_snap(std::span<const Waypoint> waypoints, bool rest_to_rest = true);

/// Constant trajectory at p over [0, duration].
PolyTrajectory hover(const Vec3& p, double duration);

/// p = p_n(t), q = identity, v = p_dot_n(t) - mean wind.
dynamics::State reference_state(const PolyTrajectory& traj, double t, const Vec3& v_w_mean);

/// Default straight line (0,0,4) -> (5,0,4) over 10 s.
std::vector<Waypoint> default_line_waypoints();

/// Default circuit: (0,0,0) then (1,0,4), (4,0,4), (4,3,4), (1,3,4), 5 s apart.
std::vector<Waypoint> default_circuit_waypoints();

}  // namespace quadmcv::trajectory
