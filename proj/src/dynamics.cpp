#include "quadmcv/dynamics.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::dynamics {

StateVec State::flat() const {
  StateVec x;
  x << p, q, v;
  return x;
}

State State::from_flat(const StateVec& x) {
  return State{x.segment<3>(0), x.segment<4>(3), x.segment<3>(7)};
}

InputVec Input::flat() const {
  InputVec u;
  u << omega, thrust;
  return u;
}

Input Input::from_flat(const InputVec& u) { return Input{u.head<3>(), u[3]}; }

namespace {

constexpr double kMinQuatNorm = 1e-12;
constexpr double kMinLinearizationSpeed = 1e-8;

Vec4 normalized(const Vec4& q) {
  const double n = q.norm();
  if (!(n > kMinQuatNorm)) {
    throw DegenerateQuaternionError(fmt::format("quaternion norm {:.3e} is degenerate", n));
  }
  return q / n;
}

// q ⊗ p = left_product(q) * p
Mat4 left_product(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat4 m;
  m << w, -x, -y, -z,
       x,  w, -z,  y,
       y,  z,  w, -x,
       z, -y,  x,  w;
  return m;
}

// p ⊗ q = right_product(q) * p
Mat4 right_product(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat4 m;
  m << w, -x, -y, -z,
       x,  w,  z, -y,
       y, -z,  w,  x,
       z,  y, -x,  w;
  return m;
}

// Partials of the homogeneous quadratic rotation polynomial w.r.t. [w, x, y, z].
std::array<Mat3, 4> rotation_partials(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << w, -z, y,
          z, w, -x,
         -y, x, w;
  d[1] << x, y, z,
          y, -x, -w,
          z, w, -x;
  d[2] << -y, x, w,
           x, y, z,
          -w, z, -y;
  d[3] << -z, -w, x,
           w, -z, y,
           x, y, z;
  for (auto& m : d) m *= 2.0;
  return d;
}

// Derivative of the drag scalar with respect to airspeed (zero where clamped).
double drag_coefficient_slope(double airspeed, DragReading reading) {
  const double e = reading == DragReading::Additive ? std::exp(-0.6 * airspeed - 2.0)
                                                    : std::exp(-0.6 * (airspeed - 2.0));
  if (0.2 + 0.9 * e >= 1.1) return 0.0;
  return -0.54 * e;
}

Vec3 drag_velocity(const State& x, const Vec3& v_w, const Params& params) {
  return params.drag_uses_airspeed ? Vec3(x.v - v_w) : x.v;
}

}  // namespace

Mat3 quat_to_rotation(const Vec4& q) {
  const Vec4 qu = normalized(q);
  const Mat4 prod = right_product(qu).transpose() * left_product(qu);
  return prod.bottomRightCorner<3, 3>();
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) { return left_product(a) * b; }

Vec4 quat_derivative(const Vec4& q, const Vec3& omega) {
  return 0.5 * quat_multiply(q, Vec4(0.0, omega.x(), omega.y(), omega.z()));
}

double drag_coefficient_scalar(double airspeed, DragReading reading) {
  const double e = reading == DragReading::Additive ? std::exp(-0.6 * airspeed - 2.0)
                                                    : std::exp(-0.6 * (airspeed - 2.0));
  return std::min(1.1, 0.2 + 0.9 * e);
}

Mat3 drag_coefficient(const Vec3& v_w, const Vec3& p_dot, DragReading reading) {
  return drag_coefficient_scalar((v_w - p_dot).norm(), reading) * Mat3::Identity();
}

Vec3 drag_force(const Vec4& q, const Vec3& v, const Mat3& D) {
  const double speed = v.norm();
  if (speed == 0.0) return Vec3::Zero();
  const Mat3 r = quat_to_rotation(q);
  return speed * (r * D * r.transpose() * v);
}

Mat3 drag_matrix(const State& x, const Vec3& v_w, const Params& params) {
  if (const auto* fixed = std::get_if<FixedDrag>(&params.drag)) return fixed->D;
  const auto& formula = std::get<FormulaDrag>(params.drag);
  const Vec3 p_dot = x.v + v_w;
  return drag_coefficient(v_w, p_dot, formula.reading);
}

StateVec derivative(const State& x, const Input& u, const Vec3& v_w, const Params& params) {
  const Vec4 qu = normalized(x.q);
  const Mat3 r = quat_to_rotation(qu);

  const Vec3 p_dot = x.v + v_w;
  const Vec4 q_dot =
      quat_derivative(qu, u.omega) + params.quat_norm_gain * (1.0 - x.q.squaredNorm()) * x.q;

  const Vec3 f_d = drag_force(qu, drag_velocity(x, v_w, params), drag_matrix(x, v_w, params));
  const Vec3 v_dot = Vec3(0.0, 0.0, -params.gravity) +
                     (u.thrust / params.mass) * r.col(2) - f_d / params.mass;

  StateVec out;
  out << p_dot, q_dot, v_dot;
  return out;
}

State step(const State& x, const Input& u, const Vec3& v_w, double dt, const Params& params) {
  const StateVec x0 = x.flat();
  auto f = [&](const StateVec& s) { return derivative(State::from_flat(s), u, v_w, params); };
  const StateVec k1 = f(x0);
  const StateVec k2 = f(x0 + 0.5 * dt * k1);
  const StateVec k3 = f(x0 + 0.5 * dt * k2);
  const StateVec k4 = f(x0 + dt * k3);
  const StateVec next = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw DivergenceError("non-finite state after integration step");
  State out = State::from_flat(next);
  out.q = normalized(out.q);
  return out;
}

Jacobians linearize(const State& x_n, const Input& u_n, const Params& params, const Vec3& v_w) {
  const Vec3 v_d = drag_velocity(x_n, v_w, params);
  const double speed = v_d.norm();
  if (speed < kMinLinearizationSpeed || x_n.v.norm() < kMinLinearizationSpeed) {
    throw SingularLinearizationError(fmt::format(
        "cannot linearize drag at speed {:.3e} m/s; perturb the nominal velocity", speed));
  }

  const double n = x_n.q.norm();
  const Vec4 qu = normalized(x_n.q);
  // d(q/|q|)/dq
  const Mat4 norm_jac = (Mat4::Identity() - qu * qu.transpose()) / n;
  const Mat3 r = quat_to_rotation(qu);
  const auto dr = rotation_partials(qu);
  const double m = params.mass;

  Jacobians j{MatA::Zero(), MatB::Zero()};

  j.A.block<3, 3>(0, 7) = Mat3::Identity();

  const Vec4 omega_q(0.0, u_n.omega.x(), u_n.omega.y(), u_n.omega.z());
  j.A.block<4, 4>(3, 3) =
      0.5 * right_product(omega_q) * norm_jac +
      params.quat_norm_gain *
          ((1.0 - n * n) * Mat4::Identity() - 2.0 * x_n.q * x_n.q.transpose());
  j.B.block<4, 3>(3, 0) = 0.5 * left_product(qu).rightCols<3>();

  // Thrust rotation: d(R e3)/dq and d/df_c.
  Eigen::Matrix<double, 3, 4> d_thrust;
  for (int i = 0; i < 4; ++i) d_thrust.col(i) = dr[i].col(2);
  j.A.block<3, 4>(7, 3) = (u_n.thrust / m) * d_thrust * norm_jac;
  j.B.block<3, 1>(7, 3) = r.col(2) / m;

  // Drag |v_d| R D R^T v_d.
  const Mat3 d = drag_matrix(x_n, v_w, params);
  const Mat3 s = r * d * r.transpose();
  Mat3 d_drag_dv = s * (speed * Mat3::Identity() + v_d * v_d.transpose() / speed);
  if (const auto* formula = std::get_if<FormulaDrag>(&params.drag)) {
    // The coefficient depends on |v_w - p_dot| = |v|.
    const double airspeed = (v_w - (x_n.v + v_w)).norm();
    const double slope = drag_coefficient_slope(airspeed, formula->reading);
    d_drag_dv += slope * speed * v_d * (x_n.v / x_n.v.norm()).transpose();
  }
  j.A.block<3, 3>(7, 7) = -d_drag_dv / m;

  Eigen::Matrix<double, 3, 4> d_drag_dq;
  for (int i = 0; i < 4; ++i) {
    d_drag_dq.col(i) = speed * (dr[i] * d * r.transpose() + r * d * dr[i].transpose()) * v_d;
  }
  j.A.block<3, 4>(7, 3) -= d_drag_dq * norm_jac / m;

  return j;
}

MatG noise_injection() {
  MatG g = MatG::Zero();
  g.topRows<3>() = Mat3::Identity();
  return g;
}

}  // namespace quadmcv::dynamics
