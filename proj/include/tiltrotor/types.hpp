#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tiltrotor {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector8 = Eigen::Matrix<double, 8, 1>;
using Vector12 = Eigen::Matrix<double, 12, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix6x8 = Eigen::Matrix<double, 6, 8>;
using Matrix8x6 = Eigen::Matrix<double, 8, 6>;
using Matrix12 = Eigen::Matrix<double, 12, 12>;
using Matrix12x6 = Eigen::Matrix<double, 12, 6>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kRpmToRadPerSec = kPi / 30.0;
inline constexpr double kRadPerSecToRpm = 30.0 / kPi;
inline constexpr double kDegToRad = kPi / 180.0;

/// Raised when the Euler-rate map is evaluated too close to gimbal lock.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the effectiveness matrix loses full row rank.
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for parameter sets that violate their domain (negative mass, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// 12-dimensional rigid-body state, packed as [position, euler, velocity, body rates].
///
/// Position is NED (z down). Velocity is the inertial-frame rate of position.
struct VehicleState {
  Vector12 x = Vector12::Zero();

  VehicleState() = default;
  explicit VehicleState(const Vector12& packed) : x(packed) {}

  auto position() { return x.segment<3>(0); }
  auto attitude() { return x.segment<3>(3); }
  auto velocity() { return x.segment<3>(6); }
  auto body_rates() { return x.segment<3>(9); }
  auto position() const { return x.segment<3>(0); }
  auto attitude() const { return x.segment<3>(3); }
  auto velocity() const { return x.segment<3>(6); }
  auto body_rates() const { return x.segment<3>(9); }

  bool finite() const { return x.allFinite(); }
};

/// Rigid-body and rotor constants. Defaults are the reference tiltrotor airframe.
struct VehicleParams {
  double mass = 0.468;                                      // kg
  Vector3 inertia{4.856e-3, 4.856e-3, 8.801e-3};            // kg m^2 (diagonal)
  double arm_length = 0.225;                                // m
  double thrust_coeff = 1.22e-5;                            // N / (rad/s)^2
  double torque_coeff = 1.689e-7;                           // N m / (rad/s)^2
  Vector3 translational_drag{0.3, 0.3, 0.25};               // kg/s (diagonal)
  Vector3 rotational_drag{0.2, 0.2, 0.2};                   // kg/s (diagonal)
  Vector3 gravity{0.0, 0.0, 9.81};                          // m/s^2

  void validate() const {
    if (!(mass > 0.0)) throw DomainError("vehicle.mass must be > 0");
    if (!(inertia.array() > 0.0).all()) throw DomainError("vehicle.inertia entries must be > 0");
    if (!(arm_length > 0.0)) throw DomainError("vehicle.arm_length must be > 0");
    if (!(thrust_coeff > 0.0)) throw DomainError("vehicle.thrust_coeff must be > 0");
    if (!(torque_coeff > 0.0)) throw DomainError("vehicle.torque_coeff must be > 0");
    if (!(translational_drag.array() >= 0.0).all())
      throw DomainError("vehicle.translational_drag entries must be >= 0");
    if (!(rotational_drag.array() >= 0.0).all())
      throw DomainError("vehicle.rotational_drag entries must be >= 0");
    if (!gravity.allFinite()) throw DomainError("vehicle.gravity must be finite");
  }

  double weight() const { return mass * gravity.z(); }
};

/// Magnitude and slew limits of the eight actuator channels.
struct ActuatorLimits {
  double rotor_speed_max = 10000.0;       // rpm
  double rotor_speed_min = 0.0;           // rpm, magnitude floor
  double tilt_max = 45.0 * kDegToRad;     // rad, symmetric
  double rotor_rate_max = 8000.0;         // rpm/s
  double tilt_rate_max = 5.0;             // rad/s

  void validate() const {
    if (!(rotor_speed_min >= 0.0 && rotor_speed_min < rotor_speed_max))
      throw DomainError("limits: require 0 <= rotor_speed_min < rotor_speed_max");
    if (!(tilt_max > 0.0 && tilt_max < kPi / 2.0))
      throw DomainError("limits: require 0 < tilt_max < pi/2");
    if (!(rotor_rate_max > 0.0 && tilt_rate_max > 0.0))
      throw DomainError("limits: rate limits must be > 0");
  }
};

/// Signed rotor speeds (rpm) followed by tilt angles (rad), packed as an 8-vector.
///
/// Rotors 1 and 2 spin positive, rotors 3 and 4 negative.
struct ActuatorCommand {
  Vector8 u = Vector8::Zero();

  ActuatorCommand() = default;
  explicit ActuatorCommand(const Vector8& packed) : u(packed) {}

  auto rotor_speeds() { return u.head<4>(); }
  auto tilts() { return u.tail<4>(); }
  auto rotor_speeds() const { return u.head<4>(); }
  auto tilts() const { return u.tail<4>(); }

  /// +1 for rotors 1, 2 and -1 for rotors 3, 4 (zero-based index 0..3).
  static constexpr double spin_sign(int rotor) { return rotor < 2 ? 1.0 : -1.0; }
};

/// Body-frame wrench [force; moment].
struct VirtualControl {
  Vector6 v = Vector6::Zero();

  VirtualControl() = default;
  explicit VirtualControl(const Vector6& packed) : v(packed) {}

  auto force() { return v.head<3>(); }
  auto moment() { return v.tail<3>(); }
  auto force() const { return v.head<3>(); }
  auto moment() const { return v.tail<3>(); }
};

/// External force (inertial frame) and moment (body frame).
struct Disturbance {
  Vector3 force = Vector3::Zero();
  Vector3 moment = Vector3::Zero();
};

/// Wrench that holds the vehicle level and still: pure lift equal to weight.
inline VirtualControl hover_wrench(const VehicleParams& p) {
  VirtualControl w;
  w.v(2) = -p.weight();
  return w;
}

}  // namespace tiltrotor
