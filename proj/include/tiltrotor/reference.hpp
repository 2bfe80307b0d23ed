#pragma once

// Reference trajectories for the evaluation scenarios.

#include <cmath>
#include <functional>

#include "tiltrotor/types.hpp"
#include "tiltrotor/vehicle_model.hpp"

namespace tiltrotor {

/// Desired pose with analytic first and second derivatives of position.
/// Attitude references are piecewise constant, so desired body rates are zero.
struct ReferenceSample {
  Vector3 position = Vector3::Zero();
  Vector3 velocity = Vector3::Zero();
  Vector3 acceleration = Vector3::Zero();
  Vector3 attitude = Vector3::Zero();

  Vector12 state() const {
    Vector12 x = Vector12::Zero();
    x.segment<3>(0) = position;
    x.segment<3>(3) = attitude;
    x.segment<3>(6) = velocity;
    return x;
  }
};

using ReferenceFn = std::function<ReferenceSample(double)>;

/// Figure-eight at constant altitude: (ax sin(pi t/T), ay sin(2 pi t/T), z0).
inline ReferenceSample lemniscate_reference(double t, double amplitude_x, double amplitude_y,
                                            double period_param, double altitude) {
  const double wx = kPi / period_param;
  const double wy = 2.0 * kPi / period_param;
  ReferenceSample r;
  r.position << amplitude_x * std::sin(wx * t), amplitude_y * std::sin(wy * t), altitude;
  r.velocity << amplitude_x * wx * std::cos(wx * t), amplitude_y * wy * std::cos(wy * t), 0.0;
  r.acceleration << -amplitude_x * wx * wx * std::sin(wx * t),
      -amplitude_y * wy * wy * std::sin(wy * t), 0.0;
  return r;
}

inline constexpr double kSluggishPeriod = 20.0;

inline ReferenceSample sluggish_lemniscate_reference(double t) {
  return lemniscate_reference(t, 4.0, 1.0, kSluggishPeriod, -4.0);
}

/// Period parameter giving a 5 m/s^2 peak on both axes: 4 (pi/T)^2 = (2 pi/T)^2 = 5.
inline double agile_period() { return kPi * std::sqrt(4.0 / 5.0); }

inline ReferenceSample agile_lemniscate_reference(double t) {
  return lemniscate_reference(t, 4.0, 1.0, agile_period(), -4.0);
}

/// Peak per-axis acceleration magnitude of a lemniscate: max(ax (pi/T)^2, ay (2 pi/T)^2).
inline double lemniscate_peak_acceleration(double amplitude_x, double amplitude_y,
                                           double period_param) {
  const double wx = kPi / period_param;
  const double wy = 2.0 * kPi / period_param;
  return std::max(amplitude_x * wx * wx, amplitude_y * wy * wy);
}

inline constexpr double kHoverTransitTime = 10.0;
inline constexpr double kAttitudeScheduleStart = 20.0;
inline constexpr double kAttitudeHold = 10.0;
inline constexpr double kAttitudeSetpoint = 20.0 * kDegToRad;

/// Fly from the origin to (4, 4, -4) on a quintic profile, hold, then cycle
/// through roll/pitch set-points of +-20 degrees in 10 s holds.
inline ReferenceSample hover_attitude_schedule(double t) {
  const Vector3 target(4.0, 4.0, -4.0);
  ReferenceSample r;
  if (t <= 0.0) {
    r.position.setZero();
  } else if (t < kHoverTransitTime) {
    const double s = t / kHoverTransitTime;
    const double T = kHoverTransitTime;
    const double p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    const double dp = 30.0 * s * s * (1.0 - s) * (1.0 - s) / T;
    const double ddp = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (T * T);
    r.position = p * target;
    r.velocity = dp * target;
    r.acceleration = ddp * target;
  } else {
    r.position = target;
  }
  if (t >= kAttitudeScheduleStart) {
    const int slot = static_cast<int>(std::floor((t - kAttitudeScheduleStart) / kAttitudeHold)) % 4;
    switch (slot) {
      case 0: r.attitude << kAttitudeSetpoint, 0.0, 0.0; break;
      case 1: r.attitude << 0.0, kAttitudeSetpoint, 0.0; break;
      case 2: r.attitude << -kAttitudeSetpoint, 0.0, 0.0; break;
      default: r.attitude << 0.0, -kAttitudeSetpoint, 0.0; break;
    }
  }
  return r;
}

/// Hold a fixed pose.
inline ReferenceSample hold_reference(const Vector3& position, const Vector3& attitude = Vector3::Zero()) {
  ReferenceSample r;
  r.position = position;
  r.attitude = attitude;
  return r;
}

/// Body wrench that makes the nominal drag-affected model follow the reference exactly.
inline VirtualControl feedforward_wrench(const ReferenceSample& r, const VehicleParams& p) {
  const Matrix3 rot = rotation_body_to_inertial(r.attitude);
  const Vector3 f_inertial =
      p.mass * (r.acceleration - p.gravity) + p.translational_drag.cwiseProduct(r.velocity);
  VirtualControl w;
  w.force() = rot.transpose() * f_inertial;
  return w;
}

}  // namespace tiltrotor
