#pragma once

// Nonlinear MPC over the body wrench with actuator-feasibility constraints.
//
// Decision variables are the stage wrenches v(0..N-1) and predicted states
// x(1..N) (direct multiple shooting). Stage 0 spans one control period and
// later stages span prediction_dt. Each SQP iteration linearizes the RK4
// dynamics, condenses the state increments out of the QP, and keeps every
// stage's rotor forces inside the set reachable under the rate and magnitude
// limits, written as linear rows in v.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tiltrotor/allocator.hpp"
#include "tiltrotor/qp.hpp"
#include "tiltrotor/reference.hpp"
#include "tiltrotor/types.hpp"
#include "tiltrotor/vehicle_model.hpp"

namespace tiltrotor {

/// What the effort term penalizes: v itself, or v minus the reference feedforward wrench.
enum class EffortReference { kZero, kFeedforward };

struct NmpcConfig {
  int horizon = 5;
  double dt = 0.02;               // control period, s
  double prediction_dt = 0.2;     // shooting interval of stages 1..N-1, s; 0 means equal to dt
  double max_substep = 0.05;      // longest RK4 substep inside one shooting interval, s
  // Position 65/65/70, attitude 8, velocity 1/1/4, body rate 0.04.
  Vector12 state_weights = (Vector12() << 65, 65, 70, 8, 8, 8, 1, 1, 4, 0.04, 0.04, 0.04).finished();
  Vector6 input_weights = Vector6::Constant(5e-4);
  EffortReference effort_reference = EffortReference::kFeedforward;
  int max_sqp_iterations = 10;
  double step_tolerance = 1e-6;
  double constraint_tolerance = 1e-6;
  double slack_penalty = 1e6;

  /// Length of shooting intervals 1..N-1. Interval 0 always spans one control period.
  double shooting_dt() const { return prediction_dt > 0.0 ? prediction_dt : dt; }

  /// Node times relative to now: 0, dt, dt + h, dt + 2h, ... (N + 1 entries).
  std::vector<double> node_offsets() const {
    std::vector<double> t(horizon + 1, 0.0);
    for (int i = 1; i <= horizon; ++i) t[i] = dt + (i - 1) * shooting_dt();
    return t;
  }

  /// RK4 substeps for an interval of the given length, each no longer than max(dt, max_substep).
  int substeps_for(double interval) const {
    const double cap = std::max(dt, max_substep);
    return std::max(1, static_cast<int>(std::ceil(interval / cap - 1e-9)));
  }

  void validate() const {
    if (horizon < 1) throw DomainError("nmpc.horizon must be >= 1");
    if (!(dt > 0.0)) throw DomainError("nmpc.dt must be > 0");
    if (!(prediction_dt >= 0.0)) throw DomainError("nmpc.prediction_dt must be >= 0");
    if (!(max_substep > 0.0)) throw DomainError("nmpc.max_substep must be > 0");
    if (!(state_weights.array() >= 0.0).all()) throw DomainError("nmpc.state_weights must be >= 0");
    if (!(input_weights.array() > 0.0).all()) throw DomainError("nmpc.input_weights must be > 0");
    if (max_sqp_iterations < 0) throw DomainError("nmpc.max_sqp_iterations must be >= 0");
    if (!(step_tolerance > 0.0 && constraint_tolerance > 0.0))
      throw DomainError("nmpc tolerances must be > 0");
    if (!(slack_penalty > 0.0)) throw DomainError("nmpc.slack_penalty must be > 0");
  }
};

/// Per-stage command bounds.
struct StageBounds {
  std::vector<ChannelBox> stages;
};

/// Rate cone around the current actuator state intersected with the magnitude
/// box. Stage i may move each channel by rate * reach[i] from u_now.
inline StageBounds build_stage_bounds(const ActuatorCommand& u_now, const ActuatorLimits& lim,
                                      const std::vector<double>& reach) {
  const ChannelBox abs_box = absolute_box(lim);
  StageBounds b;
  b.stages.reserve(reach.size());
  for (double r : reach) {
    ChannelBox box = rate_box(u_now.u, lim, r);
    box.lo = box.lo.cwiseMax(abs_box.lo);
    box.hi = box.hi.cwiseMin(abs_box.hi);
    box.lo = box.lo.cwiseMin(box.hi);
    b.stages.push_back(box);
  }
  return b;
}

/// Uniform grid: stage i reaches (i + 1) dt.
inline StageBounds build_stage_bounds(const ActuatorCommand& u_now, const ActuatorLimits& lim,
                                      double dt, int horizon) {
  std::vector<double> reach(horizon);
  for (int i = 0; i < horizon; ++i) reach[i] = (i + 1) * dt;
  return build_stage_bounds(u_now, lim, reach);
}

/// Bounds for a solver grid: each stage reaches one control period past its start.
inline StageBounds build_stage_bounds(const ActuatorCommand& u_now, const ActuatorLimits& lim,
                                      const NmpcConfig& cfg) {
  const std::vector<double> nodes = cfg.node_offsets();
  std::vector<double> reach(cfg.horizon);
  for (int i = 0; i < cfg.horizon; ++i) reach[i] = nodes[i] + cfg.dt;
  return build_stage_bounds(u_now, lim, reach);
}

/// Below this lift magnitude a rotor's tilt is treated as undefined.
inline constexpr double kTiltDegeneracyLift = 1e-6;

struct CommandLinearization {
  ActuatorCommand u;
  Matrix8x6 jacobian;
  std::array<bool, 4> degenerate{};
};

/// h(v) and its forward-difference Jacobian. Tilt rows of rotors near zero
/// lift are zeroed.
inline CommandLinearization linearize_h(const VirtualControl& w, const EffectivenessMatrix& e,
                                        const VehicleParams& p) {
  CommandLinearization lin;
  const Vector8 comps = allocate(w, e);
  lin.u = extract_commands(comps, p);
  for (int j = 0; j < 6; ++j) {
    VirtualControl wp = w;
    wp.v(j) += kJacobianStep;
    lin.jacobian.col(j) = (wrench_to_command(wp, e, p).u - lin.u.u) / kJacobianStep;
  }
  for (int i = 0; i < 4; ++i) {
    if (std::abs(comps(2 * i + 1)) < kTiltDegeneracyLift) {
      lin.degenerate[i] = true;
      lin.jacobian.row(4 + i).setZero();
    }
  }
  if (!lin.jacobian.allFinite()) {
    for (int r = 0; r < 8; ++r)
      if (!lin.jacobian.row(r).allFinite()) lin.jacobian.row(r).setZero();
  }
  return lin;
}

/// Desired states x_d(0..N) and, per stage, the feedforward wrench.
struct ReferenceWindow {
  std::vector<Vector12> states;
  std::vector<VirtualControl> wrenches;
};

inline ReferenceWindow sample_reference_window(const ReferenceFn& ref, double t,
                                               const std::vector<double>& offsets,
                                               const VehicleParams& p) {
  ReferenceWindow w;
  const int horizon = static_cast<int>(offsets.size()) - 1;
  w.states.reserve(offsets.size());
  w.wrenches.reserve(horizon);
  for (int i = 0; i <= horizon; ++i) {
    const ReferenceSample s = ref(t + offsets[i]);
    w.states.push_back(s.state());
    if (i < horizon) w.wrenches.push_back(feedforward_wrench(s, p));
  }
  return w;
}

/// Uniform sampling at t + i * stage_dt, i = 0..horizon.
inline ReferenceWindow sample_reference_window(const ReferenceFn& ref, double t, double stage_dt,
                                               int horizon, const VehicleParams& p) {
  std::vector<double> offsets(horizon + 1);
  for (int i = 0; i <= horizon; ++i) offsets[i] = i * stage_dt;
  return sample_reference_window(ref, t, offsets, p);
}

/// State error with the Euler-angle part wrapped to (-pi, pi].
inline Vector12 state_error(const Vector12& x, const Vector12& xd) {
  Vector12 e = x - xd;
  for (int k = 3; k < 6; ++k) e(k) = wrap_angle(e(k));
  return e;
}

struct SolverDiagnostics {
  int sqp_iterations = 0;
  double kkt_residual = 0.0;
  QpStatus qp_status = QpStatus::kSolved;
  int active_set_size = 0;
  int qp_iterations = 0;
  double max_defect = 0.0;             // multiple-shooting defects of the last NLP iterate
  double constraint_violation = 0.0;   // stage-0 command bound violation of the returned plan
  double slack = 0.0;
  bool converged = false;
  bool failed = false;
  double solve_time_ms = 0.0;
  std::vector<double> merit_history;
};

struct HorizonSolution {
  std::vector<VirtualControl> wrenches;    // v(0..N-1)
  std::vector<Vector12> states;            // x(0..N), x(0) is the measured state
  std::vector<ActuatorCommand> commands;   // h(v(i))
  SolverDiagnostics diagnostics;
};

/// Sequential quadratic programming solver for the feasibility-constrained NMPC problem.
/// Holds scratch storage; one instance per control loop.
class NmpcSolver {
 public:
  NmpcSolver(const NmpcConfig& cfg, const VehicleParams& params, const ActuatorLimits& limits)
      : cfg_(cfg), params_(params), limits_(limits), eff_(build_effectiveness(params)) {
    cfg_.validate();
    params_.validate();
    limits_.validate();
  }

  const NmpcConfig& config() const { return cfg_; }
  const EffectivenessMatrix& effectiveness() const { return eff_; }

  /// A prediction that pitches through the Euler singularity returns a failed
  /// solution holding `u_now` rather than throwing.
  HorizonSolution solve(const VehicleState& x0, const ReferenceWindow& ref,
                        const ActuatorCommand& u_now, const HorizonSolution* warm) const {
    try {
      return solve_impl(x0, ref, u_now, warm);
    } catch (const SingularityError&) {
      HorizonSolution out;
      const VirtualControl held = propulsive_wrench(u_now, params_);
      out.wrenches.assign(cfg_.horizon, held);
      out.commands.assign(cfg_.horizon, u_now);
      out.states.assign(cfg_.horizon + 1, x0.x);
      out.diagnostics.failed = true;
      return out;
    }
  }

 private:
  HorizonSolution solve_impl(const VehicleState& x0, const ReferenceWindow& ref,
                             const ActuatorCommand& u_now, const HorizonSolution* warm) const {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = cfg_.horizon;
    const std::vector<double> nodes = cfg_.node_offsets();
    std::vector<double> span(n);
    std::vector<int> subs(n);
    for (int i = 0; i < n; ++i) {
      span[i] = nodes[i + 1] - nodes[i];
      subs[i] = cfg_.substeps_for(span[i]);
    }
    auto propagate = [&](const Vector12& xi, const Vector6& vi, int i) {
      return integrate_rk4(xi, VirtualControl(vi), {}, params_, span[i], subs[i]);
    };
    if (static_cast<int>(ref.states.size()) != n + 1)
      throw std::invalid_argument("nmpc solve: reference must hold horizon + 1 states");

    const StageBounds bounds = build_stage_bounds(u_now, limits_, cfg_);
    const double force_scale =
        1.0 / (params_.thrust_coeff * std::pow(limits_.rotor_speed_max * kRpmToRadPerSec, 2));

    Vector8 scale;
    scale.head<4>().setConstant(1.0 / limits_.rotor_speed_max);
    scale.tail<4>().setConstant(1.0 / limits_.tilt_max);

    std::vector<Vector6> vref(n, Vector6::Zero());
    if (cfg_.effort_reference == EffortReference::kFeedforward && !ref.wrenches.empty()) {
      for (int i = 0; i < n; ++i) vref[i] = ref.wrenches[i].v;
    }

    // Initial guess: the previous plan advanced by one control period (the
    // last stage is repeated), or the reference feedforward when cold.
    std::vector<Vector6> v(n);
    std::vector<Vector12> x(n + 1);
    x[0] = x0.x;
    // Old nodes that coincide with new ones keep their predicted state, which
    // leaves the stage-0 defect to absorb the model mismatch.
    if (warm != nullptr && static_cast<int>(warm->wrenches.size()) == n) {
      for (int i = 0; i < n; ++i) {
        const double start = nodes[i] + cfg_.dt;
        int j = 0;
        while (j + 1 < n && nodes[j + 1] <= start + 1e-9) ++j;
        v[i] = warm->wrenches[j].v;
      }
      for (int i = 1; i <= n; ++i) {
        const double start = nodes[i] + cfg_.dt;
        int j = 0;
        while (j + 1 <= n && nodes[j + 1] <= start + 1e-9) ++j;
        x[i] = (std::abs(nodes[j] - start) < 1e-9 && j <= n) ? warm->states[j]
                                                             : propagate(x[i - 1], v[i - 1], i - 1);
      }
    } else {
      for (int i = 0; i < n; ++i) {
        v[i] = ref.wrenches.empty() ? hover_wrench(params_).v : ref.wrenches[i].v;
      }
      for (int i = 0; i < n; ++i) x[i + 1] = propagate(x[i], v[i], i);
    }

    const Vector12& q = cfg_.state_weights;
    const Vector6& r = cfg_.input_weights;
    // Exact-penalty weight on the shooting defects. Raised whenever it falls
    // below twice the largest costate estimate, so the merit stays exact.
    double defect_weight = 1.0;

    auto cost_of = [&](const std::vector<Vector6>& vv, const std::vector<Vector12>& xx) {
      double c = 0.0;
      for (int i = 0; i < n; ++i) {
        if (i > 0) {
          const Vector12 e = state_error(xx[i], ref.states[i]);
          c += e.dot(q.cwiseProduct(e));
        }
        const Vector6 dv = vv[i] - vref[i];
        c += dv.dot(r.cwiseProduct(dv));
      }
      return c;
    };
    auto infeasibility_of = [&](const std::vector<Vector6>& vv, const std::vector<Vector12>& xx,
                                double& defect, double& bound_violation) {
      defect = 0.0;
      bound_violation = 0.0;
      double penalty = 0.0;
      for (int i = 0; i < n; ++i) {
        const Vector12 pred = propagate(xx[i], vv[i], i);
        const double di = (pred - xx[i + 1]).lpNorm<1>();
        defect = std::max(defect, (pred - xx[i + 1]).lpNorm<Eigen::Infinity>());
        const Vector8 u = wrench_to_command(VirtualControl(vv[i]), eff_, params_).u;
        const Vector8 over =
            ((bounds.stages[i].lo - u).cwiseMax(u - bounds.stages[i].hi)).cwiseMax(0.0);
        bound_violation = std::max(bound_violation, over.maxCoeff());
        penalty += defect_weight * di + cfg_.slack_penalty * over.cwiseProduct(scale).sum();
      }
      return penalty;
    };

    SolverDiagnostics diag;
    double defect = 0.0, violation = 0.0;
    double merit = cost_of(v, x) + infeasibility_of(v, x, defect, violation);
    diag.merit_history.push_back(merit);

    // Best iterate whose stage commands satisfy their bounds.
    std::optional<std::vector<Vector6>> best_v;
    double best_merit = kInf;
    auto consider = [&](double m, double viol) {
      if (viol <= cfg_.constraint_tolerance && m < best_merit) {
        best_merit = m;
        best_v = v;
      }
    };

    const int nv = 6 * n;
    const int nz = nv + 1;  // + shared slack
    for (int it = 0; it < cfg_.max_sqp_iterations; ++it) {
      // Linearize dynamics and condense: dx_i = S_i dv + d_i.
      std::vector<Eigen::MatrixXd> sens(n + 1, Eigen::MatrixXd::Zero(12, nv));
      std::vector<Vector12> offs(n + 1, Vector12::Zero());
      std::vector<Matrix12> jac(n);
      for (int i = 0; i < n; ++i) {
        const Discretization dz = discretize_dynamics(x[i], VirtualControl(v[i]), span[i], params_, subs[i]);
        jac[i] = dz.a;
        sens[i + 1] = dz.a * sens[i];
        sens[i + 1].block(0, 6 * i, 12, 6) += dz.b;
        offs[i + 1] = dz.a * offs[i] + (dz.next - x[i + 1]);
      }

      QpProblem qp;
      qp.hessian = Eigen::MatrixXd::Zero(nz, nz);
      qp.gradient = Eigen::VectorXd::Zero(nz);
      for (int i = 1; i < n; ++i) {
        const Vector12 e = state_error(x[i], ref.states[i]) + offs[i];
        const Eigen::MatrixXd qs = q.asDiagonal() * sens[i];
        qp.hessian.topLeftCorner(nv, nv) += 2.0 * sens[i].transpose() * qs;
        qp.gradient.head(nv) += 2.0 * qs.transpose() * e;
      }
      for (int i = 0; i < n; ++i) {
        qp.hessian.block(6 * i, 6 * i, 6, 6).diagonal() += 2.0 * r;
        qp.gradient.segment(6 * i, 6) += 2.0 * r.cwiseProduct(v[i] - vref[i]);
      }
      qp.hessian(nv, nv) = 1.0;
      qp.gradient(nv) = cfg_.slack_penalty;

      std::vector<ForceRow> rows;
      for (int i = 0; i < n; ++i) {
        append_force_space_rows(i, bounds.stages[i], v[i], force_scale, rows);
      }
      const int nrows = static_cast<int>(rows.size());
      qp.ineq_matrix = Eigen::MatrixXd::Zero(nrows, nz);
      qp.ineq_lower = Eigen::VectorXd::Constant(nrows, -kInf);
      qp.ineq_upper = Eigen::VectorXd::Constant(nrows, kInf);
      for (int k = 0; k < nrows; ++k) {
        // row . (v + dv) + s >= bound
        const ForceRow& fr = rows[k];
        qp.ineq_matrix.block(k, 6 * fr.stage, 1, 6) = fr.coeffs.transpose();
        qp.ineq_matrix(k, nv) = 1.0;
        qp.ineq_lower(k) = fr.bound + kRowMargin - fr.coeffs.dot(v[fr.stage]);
      }
      qp.lower = Eigen::VectorXd::Constant(nz, -kInf);
      qp.upper = Eigen::VectorXd::Constant(nz, kInf);
      qp.lower(nv) = 0.0;

      const QpResult sol = solve_qp(qp);
      diag.qp_status = sol.status;
      diag.qp_iterations += sol.iterations;
      diag.active_set_size = sol.active_set_size;
      if (sol.status != QpStatus::kSolved) break;
      diag.sqp_iterations = it + 1;
      diag.slack = sol.z(nv);
      diag.kkt_residual = qp_kkt_residual(qp, Eigen::VectorXd::Zero(nz), sol.eq_multipliers,
                                          sol.ineq_multipliers, sol.bound_multipliers);

      const Eigen::VectorXd dv = sol.z.head(nv);
      std::vector<Vector12> dx(n + 1, Vector12::Zero());
      for (int i = 1; i <= n; ++i) dx[i] = sens[i] * dv + offs[i];

      Vector12 costate = Vector12::Zero();
      double costate_max = 0.0;
      for (int i = n - 1; i >= 1; --i) {
        costate = 2.0 * q.cwiseProduct(state_error(x[i] + dx[i], ref.states[i])) +
                  jac[i].transpose() * costate;
        costate_max = std::max(costate_max, costate.lpNorm<Eigen::Infinity>());
      }
      if (2.0 * costate_max > defect_weight) {
        defect_weight = 2.0 * costate_max;
        merit = cost_of(v, x) + infeasibility_of(v, x, defect, violation);
      }

      // Backtracking on the exact-penalty merit; full steps are taken whenever they do not increase it.
      double alpha = 1.0;
      bool accepted = false;
      std::vector<Vector6> v_try(n);
      std::vector<Vector12> x_try(n + 1);
      double merit_try = merit, defect_try = 0.0, viol_try = 0.0;
      for (int ls = 0; ls < 12; ++ls) {
        x_try[0] = x[0];
        for (int i = 0; i < n; ++i) {
          v_try[i] = v[i] + alpha * dv.segment<6>(6 * i);
          x_try[i + 1] = x[i + 1] + alpha * dx[i + 1];
        }
        try {
          merit_try = cost_of(v_try, x_try) + infeasibility_of(v_try, x_try, defect_try, viol_try);
        } catch (const SingularityError&) {
          merit_try = kInf;  // trial pitched through the Euler singularity
        }
        if (merit_try <= merit) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      const double step = alpha * dv.lpNorm<Eigen::Infinity>();
      if (!accepted) {
        diag.converged = dv.lpNorm<Eigen::Infinity>() < cfg_.step_tolerance;
        break;
      }
      v = v_try;
      x = x_try;
      merit = merit_try;
      defect = defect_try;
      violation = viol_try;
      diag.merit_history.push_back(merit);
      consider(merit, violation);
      if (step < cfg_.step_tolerance && violation <= cfg_.constraint_tolerance) {
        diag.converged = true;
        break;
      }
    }

    HorizonSolution out;
    diag.max_defect = defect;
    if (diag.sqp_iterations == 0) {
      diag.failed = true;
    } else if (violation > cfg_.constraint_tolerance && best_v) {
      v = *best_v;
    }

    out.wrenches.reserve(n);
    out.states.reserve(n + 1);
    out.commands.reserve(n);
    out.states.push_back(x0.x);
    for (int i = 0; i < n; ++i) {
      out.wrenches.emplace_back(v[i]);
      out.commands.push_back(wrench_to_command(out.wrenches.back(), eff_, params_));
      out.states.push_back(propagate(out.states.back(), v[i], i));
    }
    diag.constraint_violation = bounds.stages[0].violation(out.commands[0].u);
    if (diag.constraint_violation > cfg_.constraint_tolerance) diag.failed = true;
    diag.solve_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    out.diagnostics = std::move(diag);
    return out;
  }

  /// One linear stage constraint coeffs . v(stage) >= bound, in scaled force units.
  struct ForceRow {
    int stage;
    Vector6 coeffs;
    double bound;
  };

  static constexpr double kFacetWidth = 0.2;  // rad, angular width of one thrust-ceiling facet
  static constexpr double kRowMargin = 1e-8;  // scaled force units, absorbs QP round-off

  // The bounds on (|Omega_r|, beta_r) describe an annular sector in the plane
  // (a, b) = (lateral_sign * lateral force, lift) of rotor r, and (a, b) is
  // linear in v through the pseudo-inverse. Tilt bounds are half-planes
  // through the origin. The speed ceiling is replaced by facets inscribed in
  // its arc and the speed floor by the tangent at the current direction;
  // both lie inside the true set, so a point meeting all rows with zero
  // slack satisfies the command bounds exactly.
  void append_force_space_rows(int stage, const ChannelBox& box, const Vector6& v_lin,
                               double force_scale, std::vector<ForceRow>& rows) const {
    const Matrix8x6& pinv = eff_.b_pinv;
    const double to_rad = kRpmToRadPerSec;
    for (int r = 0; r < 4; ++r) {
      const Vector6 a_row = lateral_sign(r) * pinv.row(2 * r).transpose();
      const Vector6 b_row = -pinv.row(2 * r + 1).transpose();
      const double sgn = ActuatorCommand::spin_sign(r);
      const double speed_lo = std::max(0.0, sgn > 0 ? box.lo(r) : -box.hi(r));
      const double speed_hi = std::max(speed_lo, sgn > 0 ? box.hi(r) : -box.lo(r));
      const double c = box.lo(4 + r);
      const double d = std::max(c, box.hi(4 + r));
      const double f_lo = params_.thrust_coeff * std::pow(speed_lo * to_rad, 2);
      const double f_hi = params_.thrust_coeff * std::pow(speed_hi * to_rad, 2);
      auto dir = [&](double ang) -> Vector6 { return std::sin(ang) * a_row + std::cos(ang) * b_row; };

      // beta >= c and beta <= d.
      rows.push_back({stage, (std::cos(c) * a_row - std::sin(c) * b_row) * force_scale, 0.0});
      rows.push_back({stage, (-std::cos(d) * a_row + std::sin(d) * b_row) * force_scale, 0.0});

      const int facets = std::max(1, static_cast<int>(std::ceil((d - c) / kFacetWidth - 1e-12)));
      const double half = 0.5 * (d - c) / facets;
      for (int j = 0; j < facets; ++j) {
        const double mid = c + (2 * j + 1) * half;
        rows.push_back({stage, -dir(mid) * force_scale, -f_hi * std::cos(half) * force_scale});
      }
      if (f_lo > 0.0) {
        const double a = a_row.dot(v_lin), b = b_row.dot(v_lin);
        double ang = std::hypot(a, b) > kZeroThrustForce ? std::atan2(a, b) : 0.5 * (c + d);
        ang = std::clamp(ang, c, d);
        rows.push_back({stage, dir(ang) * force_scale, f_lo * force_scale});
      }
    }
  }

  NmpcConfig cfg_;
  VehicleParams params_;
  ActuatorLimits limits_;
  EffectivenessMatrix eff_;
};

struct ControllerOutput {
  VirtualControl wrench;
  ActuatorCommand command;
  SolverDiagnostics diagnostics;
};

/// Single-loop position and attitude controller: solves the horizon problem
/// and sends h(v(0)), clipped into the stage-0 box when it lies within the
/// constraint tolerance of it. Holds the previous command on solver failure.
class NmpcController {
 public:
  NmpcController(const NmpcConfig& cfg, const VehicleParams& params, const ActuatorLimits& limits)
      : solver_(cfg, params, limits), params_(params), limits_(limits) {}

  ControllerOutput step(const VehicleState& x0, const ReferenceWindow& ref,
                        const ActuatorCommand& u_prev) {
    HorizonSolution sol = solver_.solve(x0, ref, u_prev, warm_ ? &*warm_ : nullptr);
    ControllerOutput out;
    out.diagnostics = sol.diagnostics;
    const NmpcConfig& cfg = solver_.config();
    const ChannelBox box = build_stage_bounds(u_prev, limits_, cfg.dt, 1).stages[0];
    if (sol.diagnostics.failed) {
      out.command = u_prev;
      out.wrench = propulsive_wrench(u_prev, params_);
      warm_.reset();
      return out;
    }
    out.command = ActuatorCommand(box.clamp(sol.commands[0].u));
    out.wrench = sol.wrenches[0];
    warm_ = std::move(sol);
    return out;
  }

  void reset() { warm_.reset(); }
  const NmpcSolver& solver() const { return solver_; }
  const std::optional<HorizonSolution>& warm_start() const { return warm_; }

 private:
  NmpcSolver solver_;
  VehicleParams params_;
  ActuatorLimits limits_;
  std::optional<HorizonSolution> warm_;
};

}  // namespace tiltrotor
