#pragma once

// Trace CSV and summary JSON. Numbers are written with 17 significant digits
// so a parsed trace reproduces the in-memory doubles exactly.

#include <array>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tiltrotor/config.hpp"
#include "tiltrotor/simulation.hpp"

namespace tiltrotor {

inline constexpr const char* kVersion = "1.0.0";

namespace detail {

inline std::vector<std::string> trace_columns() {
  static const std::array<const char*, 12> state = {
      "pn [m]", "pe [m]", "pd [m]", "roll [rad]", "pitch [rad]", "yaw [rad]",
      "vn [m/s]", "ve [m/s]", "vd [m/s]", "p [rad/s]", "q [rad/s]", "r [rad/s]"};
  static const std::array<const char*, 6> wrench = {"fx [N]", "fy [N]", "fz [N]",
                                                    "mx [N m]", "my [N m]", "mz [N m]"};
  static const std::array<const char*, 8> command = {
      "w1 [rpm]", "w2 [rpm]", "w3 [rpm]", "w4 [rpm]", "b1 [rad]", "b2 [rad]", "b3 [rad]", "b4 [rad]"};
  std::vector<std::string> c{"t [s]"};
  for (const char* s : state) c.push_back(std::string("x_") + s);
  for (const char* s : state) c.push_back(std::string("ref_") + s);
  for (const char* s : wrench) c.push_back(std::string("v_") + s);
  for (const char* s : command) c.push_back(std::string("u_cmd_") + s);
  for (const char* s : command) c.push_back(std::string("u_real_") + s);
  for (const char* s : wrench) c.push_back(std::string("dist_") + s);
  c.insert(c.end(), {"sqp_iters [-]", "kkt_residual [-]", "solve_ms [ms]"});
  return c;
}

inline void put(std::string& line, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  if (!line.empty()) line += ',';
  line += buf;
}

}  // namespace detail

/// Writes the trace. Solve times are written as 0 unless `with_timing`,
/// which keeps the file byte-identical across runs of the same config.
inline void write_trace_csv(std::ostream& out, const EpisodeTrace& trace, bool with_timing = false) {
  const std::vector<std::string> cols = detail::trace_columns();
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  out << line << '\n';
  for (const TraceRow& r : trace.rows) {
    line.clear();
    detail::put(line, r.t);
    for (int i = 0; i < 12; ++i) detail::put(line, r.x(i));
    for (int i = 0; i < 12; ++i) detail::put(line, r.ref(i));
    for (int i = 0; i < 6; ++i) detail::put(line, r.v(i));
    for (int i = 0; i < 8; ++i) detail::put(line, r.u_cmd(i));
    for (int i = 0; i < 8; ++i) detail::put(line, r.u_real(i));
    for (int i = 0; i < 6; ++i) detail::put(line, r.dist(i));
    detail::put(line, r.sqp_iters);
    detail::put(line, r.kkt_residual);
    detail::put(line, with_timing ? r.solve_ms : 0.0);
    out << line << '\n';
  }
}

/// Parses a file written by write_trace_csv. Diagnostics not stored in the
/// CSV (stage-0 violation, failure flag) come back zeroed.
inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  const std::vector<std::string> cols = detail::trace_columns();
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace csv: missing header");
  {
    std::vector<std::string> header;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    if (header != cols) throw std::runtime_error("trace csv: unexpected header");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> f;
    f.reserve(cols.size());
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      try {
        std::size_t used = 0;
        const std::string cell = line.substr(pos, end - pos);
        f.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("trace csv: bad number on line " + std::to_string(lineno));
      }
      pos = end + 1;
    }
    if (f.size() != cols.size()) {
      throw std::runtime_error("trace csv: wrong field count on line " + std::to_string(lineno));
    }
    TraceRow r;
    std::size_t k = 0;
    r.t = f[k++];
    for (int i = 0; i < 12; ++i) r.x(i) = f[k++];
    for (int i = 0; i < 12; ++i) r.ref(i) = f[k++];
    for (int i = 0; i < 6; ++i) r.v(i) = f[k++];
    for (int i = 0; i < 8; ++i) r.u_cmd(i) = f[k++];
    for (int i = 0; i < 8; ++i) r.u_real(i) = f[k++];
    for (int i = 0; i < 6; ++i) r.dist(i) = f[k++];
    r.sqp_iters = static_cast<int>(f[k++]);
    r.kkt_residual = f[k++];
    r.solve_ms = f[k++];
    rows.push_back(r);
  }
  return rows;
}

namespace detail {

template <typename Derived>
nlohmann::json to_array(const Eigen::MatrixBase<Derived>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline nlohmann::json to_json(const AxisStats& s) {
  return {{"rmse", to_array(s.rmse)},
          {"rmse_total", s.rmse_total},
          {"max_abs", to_array(s.max_abs)},
          {"steady_state", to_array(s.steady_state)}};
}

}  // namespace detail

/// Resolved configuration as JSON, units as in the YAML schema.
inline nlohmann::json config_to_json(const RunConfig& c, const Scenario& scenario) {
  using detail::to_array;
  const SimulationSettings& s = c.sim;
  nlohmann::json j;
  j["scenario"] = c.scenario;
  j["controller"] = to_string(c.controller);
  j["dt"] = s.dt;
  j["duration"] = scenario.duration;
  j["seed"] = s.seed;
  j["record_timing"] = c.record_timing;
  j["vehicle"] = {{"mass", s.params.mass},
                  {"inertia", to_array(s.params.inertia)},
                  {"arm_length", s.params.arm_length},
                  {"thrust_coeff", s.params.thrust_coeff},
                  {"torque_coeff", s.params.torque_coeff},
                  {"translational_drag", to_array(s.params.translational_drag)},
                  {"rotational_drag", to_array(s.params.rotational_drag)},
                  {"gravity", to_array(s.params.gravity)}};
  j["limits"] = {{"rotor_speed_max", s.limits.rotor_speed_max},
                 {"rotor_speed_min", s.limits.rotor_speed_min},
                 {"tilt_max", s.limits.tilt_max},
                 {"rotor_rate_max", s.limits.rotor_rate_max},
                 {"tilt_rate_max", s.limits.tilt_rate_max}};
  j["nmpc"] = {{"horizon", s.nmpc.horizon},
               {"prediction_dt", s.nmpc.prediction_dt},
               {"max_substep", s.nmpc.max_substep},
               {"state_weights", to_array(s.nmpc.state_weights)},
               {"input_weights", to_array(s.nmpc.input_weights)},
               {"effort_reference", s.nmpc.effort_reference == EffortReference::kFeedforward
                                        ? "feedforward"
                                        : "zero"},
               {"max_sqp_iterations", s.nmpc.max_sqp_iterations},
               {"step_tolerance", s.nmpc.step_tolerance},
               {"constraint_tolerance", s.nmpc.constraint_tolerance},
               {"slack_penalty", s.nmpc.slack_penalty}};
  j["lqr"] = {{"state_weights", to_array(s.lqr.state)}, {"input_weights", to_array(s.lqr.input)}};
  j["smc"] = {{"surface_slope_position", to_array(s.smc.surface_slope_position)},
              {"surface_slope_attitude", to_array(s.smc.surface_slope_attitude)},
              {"reaching_gain_position", to_array(s.smc.reaching_gain_position)},
              {"reaching_gain_attitude", to_array(s.smc.reaching_gain_attitude)},
              {"boundary_layer_position", to_array(s.smc.boundary_layer_position)},
              {"boundary_layer_attitude", to_array(s.smc.boundary_layer_attitude)}};
  j["disturbance"] = {{"enabled", scenario.disturbance.enabled},
                      {"force_amplitude", scenario.disturbance.force_amplitude},
                      {"moment_amplitude", scenario.disturbance.moment_amplitude},
                      {"time_offset", scenario.disturbance.time_offset}};
  if (c.scenario == "custom") {
    j["custom"] = {{"amplitude_x", c.custom.amplitude_x},
                   {"amplitude_y", c.custom.amplitude_y},
                   {"period", c.custom.period},
                   {"altitude", c.custom.altitude},
                   {"disturbance", c.custom.disturbance}};
  }
  return j;
}

/// Metrics block of summary.json. Errors in m and rad, times in ms,
/// effort in N^2 s (the moment part contributes (N m)^2 s).
inline nlohmann::json metrics_to_json(const MetricsSummary& m) {
  return {{"position_error_m", detail::to_json(m.position)},
          {"attitude_error_rad", detail::to_json(m.attitude)},
          {"saturation_fraction", m.saturation_fraction},
          {"saturated_steps", m.saturated_steps},
          {"steps", m.steps},
          {"solve_ms_mean", m.solve_ms_mean},
          {"solve_ms_p99", m.solve_ms_p99},
          {"solve_ms_max", m.solve_ms_max},
          {"control_effort", m.control_effort},
          {"max_stage0_violation", m.max_stage0_violation},
          {"solver_failures", m.solver_failures}};
}

inline nlohmann::json summary_json(const RunConfig& c, const Scenario& scenario,
                                   const EpisodeTrace& trace, const MetricsSummary& m) {
  return {{"version", kVersion},
          {"scenario", trace.scenario},
          {"controller", trace.controller},
          {"aborted", trace.aborted},
          {"abort_reason", trace.abort_reason},
          {"metrics", metrics_to_json(m)},
          {"config", config_to_json(c, scenario)}};
}

/// Fixed-width table, one row per controller.
inline std::string comparison_table(const std::vector<std::pair<std::string, MetricsSummary>>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-6s %12s %12s %12s %12s %10s %12s %10s %10s\n", "ctrl",
                "pos_rmse_m", "att_rmse_rad", "pos_ss_m", "att_ss_rad", "sat_frac", "effort",
                "solve_ms", "p99_ms");
  out += buf;
  for (const auto& [name, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %12.5f %12.5f %12.5f %12.5f %10.4f %12.2f %10.3f %10.3f\n",
                  name.c_str(), m.position.rmse_total, m.attitude.rmse_total,
                  m.position.steady_state.maxCoeff(), m.attitude.steady_state.maxCoeff(),
                  m.saturation_fraction, m.control_effort, m.solve_ms_mean, m.solve_ms_p99);
    out += buf;
  }
  return out;
}

}  // namespace tiltrotor
