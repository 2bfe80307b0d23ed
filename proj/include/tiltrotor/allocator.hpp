#pragma once

// Pseudo-inverse control allocation for the single-axis tiltrotor.
//
// The allocator works on the eight usable per-rotor force components
// u' = (f1x, f1z, f2x, f2z, f3y, f3z, f4y, f4z), related to the wrench by
// v = B u'. The minimum-norm u' = pinv(B) v is then converted to rotor speed
// and tilt per rotor.

#include <cmath>
#include <string>

#include "tiltrotor/types.hpp"
#include "tiltrotor/vehicle_model.hpp"

namespace tiltrotor {

/// Below this per-rotor force magnitude a rotor is treated as stopped.
inline constexpr double kZeroThrustForce = 1e-9;

/// Effectiveness matrix and its pseudo-inverse for one parameter set.
struct EffectivenessMatrix {
  Matrix6x8 b = Matrix6x8::Zero();
  Matrix8x6 b_pinv = Matrix8x6::Zero();
  int rank = 0;
};

/// Builds B column by column from the forward wrench map so that allocator
/// and plant share a single sign convention.
inline EffectivenessMatrix build_effectiveness(const VehicleParams& p) {
  p.validate();
  EffectivenessMatrix e;
  for (int j = 0; j < 8; ++j) {
    e.b.col(j) = wrench_from_components(Vector8::Unit(j), p).v;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 8>> svd(e.b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv(0));
  e.rank = static_cast<int>((sv.array() > tol).count());
  if (e.rank < 6) {
    throw RankDeficiencyError("build_effectiveness: B has rank " + std::to_string(e.rank) +
                              " < 6; check arm length and rotor coefficients");
  }
  // pinv(B) = V_6 * S^-1 * U^T from the thin part of the SVD.
  Vector6 inv_s = sv.cwiseInverse();
  e.b_pinv = svd.matrixV().leftCols<6>() * inv_s.asDiagonal() * svd.matrixU().transpose();
  return e;
}

/// Minimum-norm per-rotor force components realizing `w`.
inline Vector8 allocate(const VirtualControl& w, const EffectivenessMatrix& e) {
  return e.b_pinv * w.v;
}

/// Converts per-rotor force components to signed rotor speeds (rpm) and tilts (rad).
///
/// Tilt is atan2(lateral, lift) with lift = -f_z, so pure lift gives zero tilt
/// and the tilt stays inside (-pi/2, pi/2) whenever the rotor lifts.
inline ActuatorCommand extract_commands(const Vector8& components, const VehicleParams& p) {
  ActuatorCommand cmd;
  for (int i = 0; i < 4; ++i) {
    const double lateral = components(2 * i);
    const double fz = components(2 * i + 1);
    const double magnitude = std::hypot(lateral, fz);
    if (magnitude < kZeroThrustForce) continue;
    cmd.u(i) = ActuatorCommand::spin_sign(i) * kRadPerSecToRpm *
               std::sqrt(magnitude / p.thrust_coeff);
    cmd.u(4 + i) = std::atan2(lateral_sign(i) * lateral, -fz);
  }
  return cmd;
}

/// Allocation composed with command extraction: wrench -> actuator command.
inline ActuatorCommand wrench_to_command(const VirtualControl& w, const EffectivenessMatrix& e,
                                         const VehicleParams& p) {
  return extract_commands(allocate(w, e), p);
}

/// Stateless allocator bundling the precomputed pseudo-inverse with its parameters.
class Allocator {
 public:
  explicit Allocator(const VehicleParams& p) : params_(p), eff_(build_effectiveness(p)) {}

  ActuatorCommand operator()(const VirtualControl& w) const {
    return wrench_to_command(w, eff_, params_);
  }
  const EffectivenessMatrix& effectiveness() const { return eff_; }
  const VehicleParams& params() const { return params_; }

 private:
  VehicleParams params_;
  EffectivenessMatrix eff_;
};

}  // namespace tiltrotor
