#pragma once

// Closed-loop episodes: reference -> controller -> allocator -> actuator
// limiter -> plant, plus tracking metrics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tiltrotor/allocator.hpp"
#include "tiltrotor/baselines.hpp"
#include "tiltrotor/nmpc.hpp"
#include "tiltrotor/reference.hpp"
#include "tiltrotor/types.hpp"
#include "tiltrotor/vehicle_model.hpp"

namespace tiltrotor {

struct Scenario {
  std::string name;
  double duration = 0.0;  // s
  ReferenceFn reference;
  DisturbanceConfig disturbance;
  VehicleState initial;

  void validate() const {
    if (!(duration > 0.0)) throw DomainError("scenario.duration must be > 0");
    if (!reference) throw DomainError("scenario has no reference");
    if (!initial.finite()) throw DomainError("scenario initial state must be finite");
  }

  static VehicleState rest_at(const Vector3& position) {
    VehicleState s;
    s.position() = position;
    return s;
  }

  static Scenario sluggish() {
    Scenario s;
    s.name = "sluggish";
    s.duration = 60.0;
    s.reference = sluggish_lemniscate_reference;
    s.initial = rest_at(sluggish_lemniscate_reference(0.0).position);
    return s;
  }

  static Scenario agile() {
    Scenario s;
    s.name = "agile";
    s.duration = 30.0;
    s.reference = agile_lemniscate_reference;
    s.disturbance.enabled = true;
    s.initial = rest_at(agile_lemniscate_reference(0.0).position);
    return s;
  }

  static Scenario hover_attitude() {
    Scenario s;
    s.name = "hover-attitude";
    s.duration = 70.0;
    s.reference = hover_attitude_schedule;
    s.disturbance.enabled = true;
    s.initial = rest_at(Vector3::Zero());
    return s;
  }

  /// Figure-eight with caller-chosen shape, starting at rest on the curve.
  static Scenario lemniscate(double amplitude_x, double amplitude_y, double period_param,
                             double altitude, double duration) {
    if (!(period_param > 0.0)) throw DomainError("lemniscate period must be > 0");
    Scenario s;
    s.name = "custom";
    s.duration = duration;
    s.reference = [=](double t) {
      return lemniscate_reference(t, amplitude_x, amplitude_y, period_param, altitude);
    };
    s.initial = rest_at(s.reference(0.0).position);
    return s;
  }

  /// Hold a pose, starting at `start`.
  static Scenario hover(const Vector3& target, double duration,
                        const Vector3& start = Vector3::Zero()) {
    Scenario s;
    s.name = "hover";
    s.duration = duration;
    s.reference = [=](double) { return hold_reference(target); };
    s.initial = rest_at(start);
    return s;
  }
};

/// Named scenario lookup; throws std::invalid_argument for unknown names.
inline Scenario scenario_by_name(const std::string& name) {
  if (name == "sluggish") return Scenario::sluggish();
  if (name == "agile") return Scenario::agile();
  if (name == "hover-attitude") return Scenario::hover_attitude();
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

enum class ControllerKind { kNmpc, kLqr, kSmc };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kNmpc: return "nmpc";
    case ControllerKind::kLqr: return "lqr";
    case ControllerKind::kSmc: return "smc";
  }
  return "unknown";
}

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "nmpc") return ControllerKind::kNmpc;
  if (s == "lqr") return ControllerKind::kLqr;
  if (s == "smc") return ControllerKind::kSmc;
  throw std::invalid_argument("unknown controller '" + s + "' (expected nmpc, lqr or smc)");
}

struct SimulationSettings {
  VehicleParams params;
  ActuatorLimits limits;
  NmpcConfig nmpc;
  LqrWeights lqr;
  SmcDesign smc;
  double dt = 0.02;
  std::uint64_t seed = 0;
};

/// Phase offset of the disturbance waveform for a seed. Seed 0 gives no offset.
inline double disturbance_time_offset(std::uint64_t seed) {
  if (seed == 0) return 0.0;
  std::mt19937_64 rng(seed);
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return 100.0 * unit;
}

struct TraceRow {
  double t = 0.0;
  Vector12 x = Vector12::Zero();
  Vector12 ref = Vector12::Zero();
  Vector6 v = Vector6::Zero();
  Vector8 u_cmd = Vector8::Zero();
  Vector8 u_real = Vector8::Zero();
  Vector6 dist = Vector6::Zero();  // inertial force, body moment
  int sqp_iters = 0;
  double kkt_residual = 0.0;
  double solve_ms = 0.0;
  double stage0_violation = 0.0;
  bool solver_failed = false;

  bool saturated() const { return (u_cmd.array() != u_real.array()).any(); }
};

struct EpisodeTrace {
  std::string scenario;
  std::string controller;
  double dt = 0.0;
  std::vector<TraceRow> rows;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {

class ControllerSlot {
 public:
  ControllerSlot(ControllerKind kind, const SimulationSettings& s) : kind_(kind) {
    switch (kind) {
      case ControllerKind::kNmpc: {
        NmpcConfig cfg = s.nmpc;
        cfg.dt = s.dt;
        impl_.emplace<NmpcController>(cfg, s.params, s.limits);
        break;
      }
      case ControllerKind::kLqr: impl_.emplace<LqrController>(s.params, s.dt, s.lqr); break;
      case ControllerKind::kSmc: impl_.emplace<SmcController>(s.params, s.smc); break;
    }
  }

  ControllerKind kind() const { return kind_; }
  NmpcController& nmpc() { return std::get<NmpcController>(impl_); }
  const LqrController& lqr() const { return std::get<LqrController>(impl_); }
  const SmcController& smc() const { return std::get<SmcController>(impl_); }

 private:
  ControllerKind kind_;
  std::variant<std::monostate, NmpcController, LqrController, SmcController> impl_;
};

}  // namespace detail

/// Runs one closed-loop episode. The trace holds duration/dt + 1 rows on a
/// uniform grid; the command in the final row is computed but not applied.
/// Non-finite states and attitude singularities end the episode early with
/// `aborted` set and the rows recorded so far.
inline EpisodeTrace run_episode(const Scenario& scenario, ControllerKind kind,
                                const SimulationSettings& settings) {
  scenario.validate();
  settings.params.validate();
  settings.limits.validate();
  if (!(settings.dt > 0.0)) throw DomainError("dt must be > 0");

  const VehicleParams& p = settings.params;
  const ActuatorLimits& lim = settings.limits;
  const double dt = settings.dt;
  const long steps = std::lround(scenario.duration / dt);
  const Allocator alloc(p);

  DisturbanceConfig dist_cfg = scenario.disturbance;
  dist_cfg.time_offset += disturbance_time_offset(settings.seed);

  detail::ControllerSlot ctrl(kind, settings);
  NmpcConfig grid = settings.nmpc;
  grid.dt = dt;
  const std::vector<double> offsets = grid.node_offsets();

  EpisodeTrace trace;
  trace.scenario = scenario.name;
  trace.controller = to_string(kind);
  trace.dt = dt;
  trace.rows.reserve(static_cast<std::size_t>(steps) + 1);

  VehicleState state = scenario.initial;
  ActuatorCommand u_prev = alloc(hover_wrench(p));

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    TraceRow row;
    row.t = t;
    row.x = state.x;
    try {
      if (!state.finite()) throw std::runtime_error("non-finite state");
      const ReferenceSample r = scenario.reference(t);
      row.ref = r.state();

      const auto t0 = std::chrono::steady_clock::now();
      ActuatorCommand cmd;
      switch (ctrl.kind()) {
        case ControllerKind::kNmpc: {
          const ReferenceWindow window =
              sample_reference_window(scenario.reference, t, offsets, p);
          const ControllerOutput out = ctrl.nmpc().step(state, window, u_prev);
          row.v = out.wrench.v;
          cmd = out.command;
          row.sqp_iters = out.diagnostics.sqp_iterations;
          row.kkt_residual = out.diagnostics.kkt_residual;
          row.stage0_violation = out.diagnostics.constraint_violation;
          row.solver_failed = out.diagnostics.failed;
          break;
        }
        case ControllerKind::kLqr:
          row.v = ctrl.lqr()(state.x, row.ref).v;
          cmd = alloc(VirtualControl(row.v));
          break;
        case ControllerKind::kSmc:
          row.v = ctrl.smc()(state.x, r).v;
          cmd = alloc(VirtualControl(row.v));
          break;
      }
      row.solve_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

      const ActuatorCommand realized = apply_actuator_limits(cmd, u_prev, lim, dt);
      row.u_cmd = cmd.u;
      row.u_real = realized.u;
      const Disturbance d = composite_disturbance(t, dist_cfg);
      row.dist << d.force, d.moment;
      trace.rows.push_back(row);

      if (k < steps) {
        state = step_rk4(state, propulsive_wrench(realized, p), d, p, dt);
        u_prev = realized;
      }
    } catch (const SingularityError& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("singularity at t = ") + std::to_string(t) + ": " + e.what();
      break;
    } catch (const std::runtime_error& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("aborted at t = ") + std::to_string(t) + ": " + e.what();
      break;
    }
  }
  return trace;
}

struct AxisStats {
  Vector3 rmse = Vector3::Zero();
  Vector3 max_abs = Vector3::Zero();
  Vector3 steady_state = Vector3::Zero();  // mean |e| over the final 25%
  double rmse_total = 0.0;                 // sqrt(mean ||e||^2)
};

struct MetricsSummary {
  AxisStats position;  // m
  AxisStats attitude;  // rad
  double saturation_fraction = 0.0;
  double solve_ms_mean = 0.0;
  double solve_ms_max = 0.0;
  double solve_ms_p99 = 0.0;
  double control_effort = 0.0;  // integral of ||v||^2 dt
  double max_stage0_violation = 0.0;
  long solver_failures = 0;
  long steps = 0;
  long saturated_steps = 0;
};

/// Streaming metrics. Feed rows in time order, in any chunking.
class MetricsAccumulator {
 public:
  /// Rows with t >= steady_state_start enter the steady-state averages.
  explicit MetricsAccumulator(double steady_state_start) : ss_start_(steady_state_start) {}

  void add(const TraceRow& row) {
    Vector3 ep = (row.x.segment<3>(0) - row.ref.segment<3>(0));
    Vector3 ea;
    for (int k = 0; k < 3; ++k) ea(k) = wrap_angle(row.x(3 + k) - row.ref(3 + k));
    ep = ep.cwiseAbs();
    ea = ea.cwiseAbs();
    sq_pos_ += ep.cwiseProduct(ep);
    sq_att_ += ea.cwiseProduct(ea);
    max_pos_ = max_pos_.cwiseMax(ep);
    max_att_ = max_att_.cwiseMax(ea);
    if (row.t >= ss_start_) {
      ss_pos_ += ep;
      ss_att_ += ea;
      ++ss_count_;
    }
    if (row.saturated()) ++saturated_;
    if (row.solver_failed) ++failures_;
    max_violation_ = std::max(max_violation_, row.stage0_violation);
    if (count_ > 0) effort_ += last_v_.squaredNorm() * (row.t - last_t_);
    last_v_ = row.v;
    last_t_ = row.t;
    solve_ms_.push_back(row.solve_ms);
    ++count_;
  }

  template <typename It>
  void add(It first, It last) {
    for (; first != last; ++first) add(*first);
  }

  MetricsSummary summary() const {
    if (count_ == 0) throw std::invalid_argument("metrics: empty trace");
    MetricsSummary m;
    const double n = static_cast<double>(count_);
    m.position.rmse = (sq_pos_ / n).cwiseSqrt();
    m.attitude.rmse = (sq_att_ / n).cwiseSqrt();
    m.position.rmse_total = std::sqrt(sq_pos_.sum() / n);
    m.attitude.rmse_total = std::sqrt(sq_att_.sum() / n);
    m.position.max_abs = max_pos_;
    m.attitude.max_abs = max_att_;
    if (ss_count_ > 0) {
      m.position.steady_state = ss_pos_ / static_cast<double>(ss_count_);
      m.attitude.steady_state = ss_att_ / static_cast<double>(ss_count_);
    }
    m.steps = count_;
    m.saturated_steps = saturated_;
    m.saturation_fraction = static_cast<double>(saturated_) / n;
    m.solver_failures = failures_;
    m.max_stage0_violation = max_violation_;
    m.control_effort = effort_;

    std::vector<double> times = solve_ms_;
    double sum = 0.0;
    for (double x : times) sum += x;
    m.solve_ms_mean = sum / n;
    std::sort(times.begin(), times.end());
    m.solve_ms_max = times.back();
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * n));
    m.solve_ms_p99 = times[std::clamp<std::size_t>(rank, 1, times.size()) - 1];
    return m;
  }

 private:
  double ss_start_;
  Vector3 sq_pos_ = Vector3::Zero(), sq_att_ = Vector3::Zero();
  Vector3 max_pos_ = Vector3::Zero(), max_att_ = Vector3::Zero();
  Vector3 ss_pos_ = Vector3::Zero(), ss_att_ = Vector3::Zero();
  long ss_count_ = 0;
  long count_ = 0;
  long saturated_ = 0;
  long failures_ = 0;
  double max_violation_ = 0.0;
  double effort_ = 0.0;
  Vector6 last_v_ = Vector6::Zero();
  double last_t_ = 0.0;
  std::vector<double> solve_ms_;
};

/// Steady-state window start for an episode spanning [t0, t1]: the final 25%.
inline double steady_state_start(double t0, double t1) { return t0 + 0.75 * (t1 - t0); }

inline MetricsSummary compute_metrics(const std::vector<TraceRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("metrics: empty trace");
  MetricsAccumulator acc(steady_state_start(rows.front().t, rows.back().t));
  acc.add(rows.begin(), rows.end());
  return acc.summary();
}

inline MetricsSummary compute_metrics(const EpisodeTrace& trace) { return compute_metrics(trace.rows); }

}  // namespace tiltrotor
