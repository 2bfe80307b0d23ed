#pragma once

// Comparison controllers: discrete LQR about hover and a boundary-layer
// sliding mode controller. Both output the body wrench directly and know
// nothing about actuator limits.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tiltrotor/reference.hpp"
#include "tiltrotor/types.hpp"
#include "tiltrotor/vehicle_model.hpp"

namespace tiltrotor {

class RiccatiNonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearModel {
  Matrix12 a;
  Matrix12x6 b;
};

/// Discrete-time Jacobians of the RK4 step at level hover.
inline LinearModel linearize_hover(const VehicleParams& p, double dt) {
  const Discretization d = discretize_dynamics(Vector12::Zero(), hover_wrench(p), dt, p);
  return {d.a, d.b};
}

/// Controllability matrix [B, AB, ..., A^(n-1) B].
inline Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd c(n, n * b.cols());
  Eigen::MatrixXd blk = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    c.middleCols(k * b.cols(), b.cols()) = blk;
    blk = a * blk;
  }
  return c;
}

struct RiccatiSolution {
  Eigen::MatrixXd p;
  Eigen::MatrixXd k;
  int iterations = 0;
  double residual = 0.0;
};

/// Relative residual of the discrete algebraic Riccati equation at P.
inline double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                            const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd btp = b.transpose() * p;
  const Eigen::MatrixXd rhs =
      q + a.transpose() * p * a - (btp * a).transpose() * (r + btp * b).ldlt().solve(btp * a);
  return (rhs - p).norm() / std::max(1.0, p.norm());
}

/// Fixed-point iteration of the Riccati recursion starting from P = Q.
inline RiccatiSolution dare_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                                  double tolerance = 1e-10, int max_iterations = 10000) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || q.rows() != a.rows() ||
      r.rows() != b.cols()) {
    throw std::invalid_argument("dare_solve: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) throw std::invalid_argument("dare_solve: R must be positive definite");

  RiccatiSolution sol;
  Eigen::MatrixXd p = q;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::MatrixXd btp = b.transpose() * p;
    const Eigen::MatrixXd gain = (r + btp * b).ldlt().solve(btp * a);
    Eigen::MatrixXd next = q + a.transpose() * p * (a - b * gain);
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).norm() / std::max(1.0, next.norm());
    p = next;
    if (!p.allFinite()) break;
    if (change <= tolerance) {
      sol.p = p;
      const Eigen::MatrixXd btp2 = b.transpose() * p;
      sol.k = (r + btp2 * b).ldlt().solve(btp2 * a);
      sol.iterations = it;
      sol.residual = dare_residual(a, b, q, r, p);
      return sol;
    }
  }
  throw RiccatiNonConvergence("dare_solve: Riccati recursion did not converge in " +
                              std::to_string(max_iterations) + " iterations");
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Tuned by grid search (see README): the NMPC weights diverge once the
// actuator limits engage.
struct LqrWeights {
  Vector12 state = (Vector12() << 5, 5, 5, 50, 50, 50, 1, 1, 1, 0.04, 0.04, 0.04).finished();
  Vector6 input = (Vector6() << 0.5, 0.5, 0.5, 5, 5, 5).finished();
};

struct LqrDesign {
  LinearModel model;
  Eigen::Matrix<double, 6, 12> gain;
  LqrWeights weights;
  double closed_loop_radius = 0.0;
  double riccati_residual = 0.0;
};

inline LqrDesign design_lqr(const VehicleParams& p, double dt, const LqrWeights& w = {}) {
  LqrDesign d;
  d.weights = w;
  d.model = linearize_hover(p, dt);
  const Eigen::MatrixXd q = w.state.asDiagonal();
  const Eigen::MatrixXd r = w.input.asDiagonal();
  const RiccatiSolution sol = dare_solve(d.model.a, d.model.b, q, r);
  d.gain = sol.k;
  d.riccati_residual = sol.residual;
  d.closed_loop_radius = spectral_radius(d.model.a - d.model.b * d.gain);
  return d;
}

/// v = v_hover - K (x - x_d), attitude error wrapped.
class LqrController {
 public:
  LqrController(const VehicleParams& p, double dt, const LqrWeights& w = {})
      : design_(design_lqr(p, dt, w)), hover_(hover_wrench(p)) {}

  VirtualControl operator()(const Vector12& x, const Vector12& x_desired) const {
    Vector12 e = x - x_desired;
    for (int k = 3; k < 6; ++k) e(k) = wrap_angle(e(k));
    return VirtualControl(hover_.v - design_.gain * e);
  }

  const LqrDesign& design() const { return design_; }

 private:
  LqrDesign design_;
  VirtualControl hover_;
};

// The attitude reaching gain has to exceed the angular acceleration of the
// disturbance moment (about 15 rad/s^2 at the default amplitude).
struct SmcDesign {
  Vector3 surface_slope_position = Vector3::Constant(1.5);   // 1/s
  Vector3 surface_slope_attitude = Vector3::Constant(4.0);   // 1/s
  Vector3 reaching_gain_position = Vector3::Constant(4.0);   // m/s^2
  Vector3 reaching_gain_attitude = Vector3::Constant(60.0);  // rad/s^2
  Vector3 boundary_layer_position = Vector3::Constant(2.0);
  Vector3 boundary_layer_attitude = Vector3::Constant(0.5);

  void validate() const {
    for (const Vector3* v : {&surface_slope_position, &surface_slope_attitude,
                             &reaching_gain_position, &reaching_gain_attitude,
                             &boundary_layer_position, &boundary_layer_attitude}) {
      if (!(v->array() > 0.0).all()) throw DomainError("smc gains must be > 0");
    }
  }
};

/// Unit saturation, the boundary-layer replacement for sign().
inline double sat(double s) { return std::clamp(s, -1.0, 1.0); }

struct SlidingSurfaces {
  Vector3 translational;
  Vector3 rotational;
};

inline SlidingSurfaces sliding_surfaces(const Vector12& x, const ReferenceSample& r,
                                        const SmcDesign& d) {
  SlidingSurfaces s;
  s.translational = (x.segment<3>(6) - r.velocity) +
                    d.surface_slope_position.cwiseProduct(x.segment<3>(0) - r.position);
  Vector3 eta_err = x.segment<3>(3) - r.attitude;
  for (int k = 0; k < 3; ++k) eta_err(k) = wrap_angle(eta_err(k));
  s.rotational = x.segment<3>(9) + d.surface_slope_attitude.cwiseProduct(eta_err);
  return s;
}

/// Equivalent control of the rigid-body model plus a saturated switching term.
class SmcController {
 public:
  SmcController(const VehicleParams& p, const SmcDesign& d = {}) : params_(p), design_(d) {
    design_.validate();
  }

  VirtualControl operator()(const Vector12& x, const ReferenceSample& r) const {
    const VehicleParams& p = params_;
    const SmcDesign& d = design_;
    const Vector3 eta = x.segment<3>(3);
    const Vector3 vel = x.segment<3>(6);
    const Vector3 omega = x.segment<3>(9);
    const SlidingSurfaces s = sliding_surfaces(x, r, d);

    Vector3 sw_p, sw_a;
    for (int k = 0; k < 3; ++k) {
      sw_p(k) = d.reaching_gain_position(k) * sat(s.translational(k) / d.boundary_layer_position(k));
      sw_a(k) = d.reaching_gain_attitude(k) * sat(s.rotational(k) / d.boundary_layer_attitude(k));
    }

    const Vector3 f_inertial =
        p.mass * (r.acceleration - p.gravity -
                  d.surface_slope_position.cwiseProduct(vel - r.velocity)) +
        p.translational_drag.cwiseProduct(vel) - p.mass * sw_p;
    const Matrix3 rot = rotation_body_to_inertial(eta);
    const Matrix3 h = euler_rate_matrix(eta);
    const Vector3 j_omega = p.inertia.cwiseProduct(omega);
    const Vector3 desired_omega_dot = -d.surface_slope_attitude.cwiseProduct(h * omega) - sw_a;
    const Vector3 torque = omega.cross(j_omega) + p.rotational_drag.cwiseProduct(omega) +
                           p.inertia.cwiseProduct(desired_omega_dot);

    VirtualControl w;
    w.force() = rot.transpose() * f_inertial;
    w.moment() = torque;
    return w;
  }

  const SmcDesign& design() const { return design_; }

 private:
  VehicleParams params_;
  SmcDesign design_;
};

}  // namespace tiltrotor
