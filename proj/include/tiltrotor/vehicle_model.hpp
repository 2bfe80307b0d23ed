#pragma once

// Six-DOF single-axis tiltrotor quadrotor plant.
//
// Frames: inertial NED, body FRD. Rotors 1/2 sit on the +y/-y arms and tilt
// about the body y axis (lateral force along x); rotors 3/4 sit on the +x/-x
// arms and tilt about the body x axis (lateral force along y). At zero tilt
// every rotor lifts along -z_B. Rotor indices in code are zero-based.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "tiltrotor/types.hpp"

namespace tiltrotor {

inline constexpr double kDefaultSingularityGuard = 1e-3;

/// Maps body rates to Euler angle rates: eta_dot = H(eta) * omega.
inline Matrix3 euler_rate_matrix(const Vector3& eta,
                                 double guard = kDefaultSingularityGuard) {
  const double phi = eta(0);
  const double theta = eta(1);
  if (!(std::abs(theta) < kPi / 2.0 - guard)) {
    throw SingularityError("euler_rate_matrix: pitch within singularity guard of +-pi/2");
  }
  const double sp = std::sin(phi), cp = std::cos(phi);
  const double tt = std::tan(theta), ct = std::cos(theta);
  Matrix3 h;
  h << 1.0, sp * tt, cp * tt,
       0.0, cp, -sp,
       0.0, sp / ct, cp / ct;
  return h;
}

/// Body-to-inertial rotation for yaw-pitch-roll Euler angles, R = Rz(psi) Ry(theta) Rx(phi).
inline Matrix3 rotation_body_to_inertial(const Vector3& eta) {
  const double sf = std::sin(eta(0)), cf = std::cos(eta(0));
  const double st = std::sin(eta(1)), ct = std::cos(eta(1));
  const double sy = std::sin(eta(2)), cy = std::cos(eta(2));
  Matrix3 r;
  r << cy * ct, cy * st * sf - sy * cf, cy * st * cf + sy * sf,
       sy * ct, sy * st * sf + cy * cf, sy * st * cf - cy * sf,
       -st, ct * sf, ct * cf;
  return r;
}

/// Thrust magnitude T = k_T * Omega^2 with Omega given in rpm.
inline double rotor_thrust(double speed_rpm, const VehicleParams& p) {
  const double w = speed_rpm * kRpmToRadPerSec;
  return p.thrust_coeff * w * w;
}

/// Body axis (0 = x, 1 = y) that carries a rotor's tilt-induced lateral force.
inline constexpr int lateral_axis(int rotor) { return rotor < 2 ? 0 : 1; }

/// Sign of the lateral force for positive tilt: +1, -1, +1, -1 for rotors 0..3.
inline constexpr double lateral_sign(int rotor) { return (rotor % 2 == 0) ? 1.0 : -1.0; }

/// Body-frame force of one rotor. `rotor` is zero-based (0..3).
inline Vector3 rotor_force(int rotor, double speed_rpm, double tilt, const VehicleParams& p) {
  if (rotor < 0 || rotor > 3) throw std::out_of_range("rotor_force: rotor index must be 0..3");
  const double thrust = rotor_thrust(speed_rpm, p);
  Vector3 f = Vector3::Zero();
  f(lateral_axis(rotor)) = lateral_sign(rotor) * thrust * std::sin(tilt);
  f(2) = -thrust * std::cos(tilt);
  return f;
}

/// Per-rotor force components (x or y lateral, then z) packed as
/// (f1x, f1z, f2x, f2z, f3y, f3z, f4y, f4z).
inline Vector8 rotor_force_components(const ActuatorCommand& cmd, const VehicleParams& p) {
  Vector8 c;
  for (int i = 0; i < 4; ++i) {
    const Vector3 f = rotor_force(i, cmd.u(i), cmd.u(4 + i), p);
    c(2 * i) = f(lateral_axis(i));
    c(2 * i + 1) = f(2);
  }
  return c;
}

/// Total body wrench from per-rotor force components. Linear in its argument.
inline VirtualControl wrench_from_components(const Vector8& c, const VehicleParams& p) {
  const double l = p.arm_length;
  const double kq = p.torque_coeff / p.thrust_coeff;
  const double f1x = c(0), f1z = c(1), f2x = c(2), f2z = c(3);
  const double f3y = c(4), f3z = c(5), f4y = c(6), f4z = c(7);
  VirtualControl w;
  w.v << f1x + f2x,
         f3y + f4y,
         f1z + f2z + f3z + f4z,
         l * (f1z - f2z),
         l * (-f3z + f4z),
         kq * (-f1z - f2z + f3z + f4z) + l * (-f1x + f2x) + l * (f3y - f4y);
  return w;
}

/// Wrench produced by an actuator command.
inline VirtualControl propulsive_wrench(const ActuatorCommand& cmd, const VehicleParams& p) {
  return wrench_from_components(rotor_force_components(cmd, p), p);
}

/// Continuous-time dynamics. Returns d/dt of the packed state.
inline Vector12 state_derivative(const VehicleState& s, const VirtualControl& w,
                                 const Disturbance& d, const VehicleParams& p,
                                 double guard = kDefaultSingularityGuard) {
  const Vector3 eta = s.attitude();
  const Vector3 vel = s.velocity();
  const Vector3 omega = s.body_rates();
  const Matrix3 r = rotation_body_to_inertial(eta);

  Vector12 dx;
  dx.segment<3>(0) = vel;
  dx.segment<3>(3) = euler_rate_matrix(eta, guard) * omega;
  dx.segment<3>(6) =
      p.gravity + (r * w.force() - p.translational_drag.cwiseProduct(vel) + d.force) / p.mass;
  const Vector3 j_omega = p.inertia.cwiseProduct(omega);
  const Vector3 torque = -omega.cross(j_omega) + w.moment() -
                         p.rotational_drag.cwiseProduct(omega) + d.moment;
  dx.segment<3>(9) = torque.cwiseQuotient(p.inertia);
  return dx;
}

/// Wraps roll and yaw into (-pi, pi]. Pitch is left alone; the rate guard keeps it interior.
inline void wrap_attitude(VehicleState& s) {
  s.x(3) = wrap_angle(s.x(3));
  s.x(5) = wrap_angle(s.x(5));
}

/// Classical Runge-Kutta step without angle wrapping; smooth in all arguments.
inline Vector12 integrate_rk4(const Vector12& x, const VirtualControl& w, const Disturbance& d,
                              const VehicleParams& p, double dt,
                              double guard = kDefaultSingularityGuard) {
  const Vector12 k1 = state_derivative(VehicleState(x), w, d, p, guard);
  const Vector12 k2 = state_derivative(VehicleState(x + 0.5 * dt * k1), w, d, p, guard);
  const Vector12 k3 = state_derivative(VehicleState(x + 0.5 * dt * k2), w, d, p, guard);
  const Vector12 k4 = state_derivative(VehicleState(x + dt * k3), w, d, p, guard);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// `substeps` equal RK4 steps spanning dt, wrench and disturbance held.
inline Vector12 integrate_rk4(const Vector12& x, const VirtualControl& w, const Disturbance& d,
                              const VehicleParams& p, double dt, int substeps,
                              double guard = kDefaultSingularityGuard) {
  if (substeps < 1) throw std::invalid_argument("integrate_rk4: substeps must be >= 1");
  const double h = dt / substeps;
  Vector12 y = x;
  for (int k = 0; k < substeps; ++k) y = integrate_rk4(y, w, d, p, h, guard);
  return y;
}

/// One classical Runge-Kutta step with wrench and disturbance held over the interval.
inline VehicleState step_rk4(const VehicleState& s, const VirtualControl& w, const Disturbance& d,
                             const VehicleParams& p, double dt,
                             double guard = kDefaultSingularityGuard) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be > 0");
  VehicleState next(integrate_rk4(s.x, w, d, p, dt, guard));
  wrap_attitude(next);
  return next;
}

struct Discretization {
  Vector12 next;
  Matrix12 a;
  Matrix12x6 b;
};

inline constexpr double kJacobianStep = 1e-6;

/// Disturbance-free RK4 transition over dt and its forward-difference Jacobians.
inline Discretization discretize_dynamics(const Vector12& x, const VirtualControl& w, double dt,
                                          const VehicleParams& p, int substeps = 1) {
  const Disturbance none;
  Discretization d;
  d.next = integrate_rk4(x, w, none, p, dt, substeps);
  for (int j = 0; j < 12; ++j) {
    Vector12 xp = x;
    xp(j) += kJacobianStep;
    d.a.col(j) = (integrate_rk4(xp, w, none, p, dt, substeps) - d.next) / kJacobianStep;
  }
  for (int j = 0; j < 6; ++j) {
    VirtualControl wp = w;
    wp.v(j) += kJacobianStep;
    d.b.col(j) = (integrate_rk4(x, wp, none, p, dt, substeps) - d.next) / kJacobianStep;
  }
  return d;
}

/// Per-channel interval [lo, hi] in command units.
struct ChannelBox {
  Vector8 lo;
  Vector8 hi;

  bool contains(const Vector8& u, double tol = 0.0) const {
    return ((u - lo).array() >= -tol).all() && ((hi - u).array() >= -tol).all();
  }
  /// Largest violation of the box, zero when inside.
  double violation(const Vector8& u) const {
    return std::max({0.0, (lo - u).maxCoeff(), (u - hi).maxCoeff()});
  }
  Vector8 clamp(const Vector8& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
};

/// Absolute magnitude box respecting the rotor spin-sign pattern.
inline ChannelBox absolute_box(const ActuatorLimits& lim) {
  ChannelBox b;
  for (int i = 0; i < 4; ++i) {
    if (ActuatorCommand::spin_sign(i) > 0.0) {
      b.lo(i) = lim.rotor_speed_min;
      b.hi(i) = lim.rotor_speed_max;
    } else {
      b.lo(i) = -lim.rotor_speed_max;
      b.hi(i) = -lim.rotor_speed_min;
    }
    b.lo(4 + i) = -lim.tilt_max;
    b.hi(4 + i) = lim.tilt_max;
  }
  return b;
}

/// Slew window reachable from `from` within `horizon` seconds (no magnitude clamp).
inline ChannelBox rate_box(const Vector8& from, const ActuatorLimits& lim, double horizon) {
  ChannelBox b;
  const double dw = lim.rotor_rate_max * horizon;
  const double db = lim.tilt_rate_max * horizon;
  for (int i = 0; i < 4; ++i) {
    b.lo(i) = from(i) - dw;
    b.hi(i) = from(i) + dw;
    b.lo(4 + i) = from(4 + i) - db;
    b.hi(4 + i) = from(4 + i) + db;
  }
  return b;
}

/// Plant-side actuator model: slew toward the command, then clamp to magnitude limits.
inline ActuatorCommand apply_actuator_limits(const ActuatorCommand& cmd,
                                             const ActuatorCommand& prev,
                                             const ActuatorLimits& lim, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("apply_actuator_limits: dt must be > 0");
  const ChannelBox slew = rate_box(prev.u, lim, dt);
  const ChannelBox mag = absolute_box(lim);
  return ActuatorCommand(mag.clamp(slew.clamp(cmd.u)));
}

struct DisturbanceConfig {
  bool enabled = false;
  double force_amplitude = 0.5;    // N
  double moment_amplitude = 0.05;  // N m
  double time_offset = 0.0;        // s, shifts the waveform phase
};

/// Composite two-tone sinusoid applied identically on every axis.
inline Disturbance composite_disturbance(double t, const DisturbanceConfig& cfg) {
  Disturbance d;
  if (!cfg.enabled) return d;
  const double tau = t + cfg.time_offset;
  const double f = cfg.force_amplitude * (std::sin(0.5 * tau) + 0.5 * std::sin(1.3 * tau + 1.0));
  const double m = cfg.moment_amplitude * (std::sin(0.7 * tau) + 0.5 * std::sin(1.1 * tau + 2.0));
  d.force.setConstant(f);
  d.moment.setConstant(m);
  return d;
}

}  // namespace tiltrotor
