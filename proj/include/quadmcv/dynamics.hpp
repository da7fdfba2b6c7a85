#pragma once

#include <variant>

#include "quadmcv/types.hpp"

namespace quadmcv::dynamics {

/// Quadrotor state. Quaternions are Hamilton [w, x, y, z], body to inertial.
/// Flattened order is [p; q; v].
struct State {
  Vec3 p = Vec3::Zero();
  Vec4 q = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 v = Vec3::Zero();

  StateVec flat() const;
  static State from_flat(const StateVec& x);
};

/// Body rates (rad/s) and collective thrust (N). Flattened order is [omega; f_c].
struct Input {
  Vec3 omega = Vec3::Zero();
  double thrust = 0.0;

  InputVec flat() const;
  static Input from_flat(const InputVec& u);
};

/// How the printed exponent in the airspeed drag formula is grouped.
enum class DragReading {
  /// exp(-0.6 * a - 2)
  Additive,
  /// exp(-0.6 * (a - 2))
  Scaled,
};

struct FormulaDrag {
  DragReading reading = DragReading::Additive;
};

struct FixedDrag {
  Mat3 D = Mat3::Zero();
};

using DragModel = std::variant<FormulaDrag, FixedDrag>;

struct Params {
  double mass = 1.0;
  double gravity = 9.81;
  DragModel drag = FormulaDrag{};
  /// Use v - v_w instead of v in the drag force.
  bool drag_uses_airspeed = false;
  /// Gain k of the k(1 - |q|^2) q term added to q-dot. It is zero on the unit
  /// sphere and gives the otherwise marginal |q| direction a decay rate of 2k in
  /// the linearization.
  double quat_norm_gain = 1.0;
};

/// Rotation from the lower-right block of Qbar^T(q) Q(q). q is normalized
/// first; throws DegenerateQuaternionError for |q| <= 1e-12.
Mat3 quat_to_rotation(const Vec4& q);

/// Hamilton product a ⊗ b.
Vec4 quat_multiply(const Vec4& a, const Vec4& b);

/// 0.5 * q ⊗ [0; omega].
Vec4 quat_derivative(const Vec4& q, const Vec3& omega);

/// Scalar airspeed drag coefficient min(1.1, 0.2 + 0.9 exp(...)).
double drag_coefficient_scalar(double airspeed, DragReading reading);

/// d * I3 with d from the airspeed |v_w - p_dot|.
Mat3 drag_coefficient(const Vec3& v_w, const Vec3& p_dot,
                      DragReading reading = DragReading::Additive);

/// |v| R D R^T v. Exactly zero at v = 0.
Vec3 drag_force(const Vec4& q, const Vec3& v, const Mat3& D);

/// Drag matrix in effect for the given state and wind.
Mat3 drag_matrix(const State& x, const Vec3& v_w, const Params& params);

/// Time derivative [p_dot; q_dot; v_dot] of the full nonlinear model.
StateVec derivative(const State& x, const Input& u, const Vec3& v_w, const Params& params);

/// Classical RK4 with v_w held over the step, followed by quaternion
/// renormalization. Throws DivergenceError on a non-finite result.
State step(const State& x, const Input& u, const Vec3& v_w, double dt, const Params& params);

struct Jacobians {
  MatA A;
  MatB B;
};

/// Analytic Jacobians of `derivative` at (x_n, u_n) with wind v_w.
/// Throws SingularLinearizationError when |v| < 1e-8.
Jacobians linearize(const State& x_n, const Input& u_n, const Params& params,
                    const Vec3& v_w = Vec3::Zero());

/// [I3; 0]: turbulence enters through p_dot = v + v_w.
MatG noise_injection();

/// Linearization together with the noise model it is used with.
struct LinearModel {
  MatA A;
  MatB B;
  MatG G = noise_injection();
  Mat3 W = Mat3::Zero();
};

}  // namespace quadmcv::dynamics
