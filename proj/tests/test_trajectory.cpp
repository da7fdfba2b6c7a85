#include <doctest.h>

#include <cmath>

#include "quadmcv/errors.hpp"
#include "quadmcv/trajectory.hpp"

using namespace quadmcv;
using namespace quadmcv::trajectory;

namespace {

double joint_jump(const PolyTrajectory& t, std::size_t j, int order) {
  const auto& segs = t.segments();
  return (t.derivative_in_segment(j, segs[j].duration, order) -
          t.derivative_in_segment(j + 1, 0.0, order))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("single segment rest-to-rest closed form") {
  const std::vector<Waypoint> wp{{Vec3(0, 0, 0), 0.0}, {Vec3(1, 0, 0), 1.0}};
  const auto t = min_snap(wp);
  REQUIRE(t.segments().size() == 1);
  Coeffs expected;
  expected << 0, 0, 0, 0, 35, -84, 70, -20;
  CHECK((t.segments()[0].coeffs[0] - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(t.segments()[0].coeffs[1].cwiseAbs().maxCoeff() < 1e-12);

  const auto mid = t.sample(0.5);
  CHECK(mid.position.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.velocity.x() == doctest::Approx(2.1875).epsilon(1e-12));
}

TEST_CASE("closed form scales with segment duration") {
  const double T = 4.0;
  const std::vector<Waypoint> wp{{Vec3(0, 0, 0), 0.0}, {Vec3(2, 0, 0), T}};
  const auto t = min_snap(wp);
  for (double tau = 0.0; tau <= T; tau += 0.1) {
    const double s = tau / T;
    const double p = 2 * (35 * std::pow(s, 4) - 84 * std::pow(s, 5) + 70 * std::pow(s, 6) -
                          20 * std::pow(s, 7));
    CHECK(std::abs(t.sample(tau).position.x() - p) < 1e-12);
  }
}

TEST_CASE("boundary samples are at rest on the waypoints") {
  const auto wp = default_circuit_waypoints();
  const auto t = min_snap(wp);
  const auto s0 = t.sample(0.0);
  const auto s1 = t.sample(t.end_time());
  CHECK((s0.position - wp.front().position).norm() < 1e-12);
  CHECK((s1.position - wp.back().position).norm() < 1e-9);
  CHECK(s0.velocity.norm() < 1e-12);
  CHECK(s1.velocity.norm() < 1e-9);
  for (int r = 2; r <= 3; ++r) {
    CHECK(t.derivative(0.0, r).norm() < 1e-9);
    CHECK(t.derivative(t.end_time(), r).norm() < 1e-9);
  }
}

TEST_CASE("circuit interpolates every waypoint and is C3 at joints") {
  const auto wp = default_circuit_waypoints();
  const auto t = min_snap(wp);
  for (const auto& w : wp) CHECK((t.sample(w.time).position - w.position).norm() < 1e-9);
  for (std::size_t j = 0; j + 1 < t.segments().size(); ++j) {
    for (int r = 0; r <= 3; ++r) CHECK(joint_jump(t, j, r) < 1e-9);
  }
  CHECK(t.duration() == doctest::Approx(20.0));
}

TEST_CASE("degenerate motion gives a constant polynomial") {
  const std::vector<Waypoint> wp{{Vec3(1, 2, 3), 0.0}, {Vec3(1, 2, 3), 2.0}};
  const auto t = min_snap(wp);
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(t.segments()[0].coeffs[a][0] - wp[0].position[a]) < 1e-12);
    CHECK(t.segments()[0].coeffs[a].tail<7>().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("collinear waypoints stay on the line") {
  const std::vector<Waypoint> axis{{Vec3(0, 0, 0), 0.0}, {Vec3(1, 0, 0), 1.5}, {Vec3(3, 0, 0), 4.0}};
  const auto t = min_snap(axis);
  for (double s = 0.0; s <= 4.0; s += 0.05) {
    CHECK(std::abs(t.sample(s).position.y()) < 1e-10);
    CHECK(std::abs(t.sample(s).position.z()) < 1e-10);
  }
  const Vec3 d = Vec3(1, 2, -0.5).normalized();
  const Vec3 o(0.5, 0.5, 4.0);
  const std::vector<Waypoint> slanted{{o, 0.0}, {o + 2 * d, 2.0}, {o + 3 * d, 5.0}};
  const auto u = min_snap(slanted);
  for (double s = 0.0; s <= 5.0; s += 0.05) {
    const Vec3 rel = u.sample(s).position - o;
    CHECK((rel - rel.dot(d) * d).norm() < 1e-10);
  }
}

TEST_CASE("time scaling scales velocity") {
  const auto wp = default_circuit_waypoints();
  const double c = 1.7;
  std::vector<Waypoint> slow = wp;
  for (auto& w : slow) w.time *= c;
  const auto a = min_snap(wp);
  const auto b = min_snap(slow);
  for (double s = 0.0; s <= a.end_time(); s += 0.25) {
    CHECK((b.sample(c * s).position - a.sample(s).position).norm() < 1e-9);
    CHECK((b.sample(c * s).velocity - a.sample(s).velocity / c).norm() < 1e-9);
  }
}

TEST_CASE("waypoint validation") {
  CHECK_THROWS_AS(min_snap(std::vector<Waypoint>{{Vec3::Zero(), 0.0}}), DegenerateWaypointsError);
  CHECK_THROWS_AS(min_snap(std::vector<Waypoint>{{Vec3::Zero(), 0.0}, {Vec3::Ones(), 0.0}}),
                  DegenerateWaypointsError);
  CHECK_THROWS_AS(min_snap(std::vector<Waypoint>{{Vec3::Zero(), 1.0}, {Vec3::Ones(), 0.5}}),
                  DegenerateWaypointsError);
  const auto t = min_snap(default_line_waypoints());
  CHECK_THROWS_AS(t.sample(-0.1), OutOfRangeError);
  CHECK_THROWS_AS(t.sample(10.1), OutOfRangeError);
}

TEST_CASE("hover trajectory") {
  const auto h = hover(Vec3(1, 1, 8), 20.0);
  for (double s : {0.0, 3.3, 10.0, 20.0}) {
    CHECK(h.sample(s).position == Vec3(1, 1, 8));
    CHECK(h.sample(s).velocity == Vec3::Zero());
  }
  CHECK(hover(Vec3::Zero(), 1.0).sample(0.5).position == Vec3::Zero());
  CHECK_THROWS_AS(hover(Vec3::Zero(), 0.0), DegenerateWaypointsError);
}

TEST_CASE("reference state") {
  const Vec3 mean(2.72, 1.752, -0.006);
  const auto x = reference_state(hover(Vec3(1, 1, 8), 20.0), 4.0, mean);
  CHECK(x.p == Vec3(1, 1, 8));
  CHECK(x.q == Vec4(1, 0, 0, 0));
  CHECK(x.v.isApprox(Vec3(-2.72, -1.752, 0.006)));
  const auto line = min_snap(default_line_waypoints());
  CHECK(reference_state(line, 0.0, Vec3::Zero()).v.norm() < 1e-12);
  for (double s = 0.0; s <= 10.0; s += 1.3) {
    const auto r = reference_state(line, s, mean);
    CHECK(r.q == Vec4(1, 0, 0, 0));
    CHECK((r.v - (line.sample(s).velocity - mean)).norm() == 0.0);
  }
}
