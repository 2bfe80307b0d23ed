#pragma once

// Run configuration: YAML file -> fully resolved settings.
//
// Every key is optional; missing keys keep the defaults of the structs they
// land in. Unknown keys are rejected with their line number.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tiltrotor/simulation.hpp"

namespace tiltrotor {

/// Bad configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Shape of the "custom" scenario.
struct CustomLemniscate {
  double amplitude_x = 4.0;      // m
  double amplitude_y = 1.0;      // m
  double period = 20.0;          // s
  double altitude = -4.0;        // m, NED z
  bool disturbance = false;
};

struct RunConfig {
  std::string scenario = "sluggish";
  ControllerKind controller = ControllerKind::kNmpc;
  SimulationSettings sim;
  std::optional<double> duration;           // s; scenario default when unset
  std::optional<bool> disturbance_enabled;  // scenario default when unset
  DisturbanceConfig disturbance;            // amplitudes and phase; `enabled` ignored
  CustomLemniscate custom;
  std::string output_dir = "out";
  bool record_timing = false;  // write measured solve times into trace.csv

  /// Scenario with duration and disturbance overrides applied.
  Scenario make_scenario() const {
    Scenario s;
    if (scenario == "custom") {
      s = Scenario::lemniscate(custom.amplitude_x, custom.amplitude_y, custom.period,
                               custom.altitude, 60.0);
      s.disturbance.enabled = custom.disturbance;
    } else {
      s = scenario_by_name(scenario);
    }
    const bool enabled = disturbance_enabled.value_or(s.disturbance.enabled);
    s.disturbance = disturbance;
    s.disturbance.enabled = enabled;
    if (duration) s.duration = *duration;
    return s;
  }

  void validate() const {
    if (scenario != "sluggish" && scenario != "agile" && scenario != "hover-attitude" &&
        scenario != "custom") {
      throw ConfigError("scenario must be one of sluggish, agile, hover-attitude, custom");
    }
    sim.params.validate();
    sim.limits.validate();
    sim.nmpc.validate();
    sim.smc.validate();
    if (!(sim.dt > 0.0)) throw DomainError("dt must be > 0");
    if (duration && !(*duration > 0.0)) throw DomainError("duration must be > 0");
    if (!(sim.lqr.state.array() >= 0.0).all()) throw DomainError("lqr.state_weights must be >= 0");
    if (!(sim.lqr.input.array() > 0.0).all()) throw DomainError("lqr.input_weights must be > 0");
    if (!(custom.period > 0.0)) throw DomainError("custom.period must be > 0");
    if (!(disturbance.force_amplitude >= 0.0 && disturbance.moment_amplitude >= 0.0))
      throw DomainError("disturbance amplitudes must be >= 0");
  }
};

namespace detail {

inline std::string join(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline void require_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + " must be a mapping", line_of(n));
}

inline void reject_unknown(const YAML::Node& n, const std::string& where,
                           const std::set<std::string>& allowed) {
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + join(where, key.c_str()) + "'",
                        line_of(kv.first));
    }
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(key + " must be a scalar", line_of(n));
  try {
    return n.as<T>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(key + ": cannot parse '" + n.Scalar() + "'", line_of(n));
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, const std::string& where, T& out) {
  if (const YAML::Node n = parent[key]) out = scalar<T>(n, join(where, key));
}

template <int N>
void read_vector(const YAML::Node& parent, const char* key, const std::string& where,
                 Eigen::Matrix<double, N, 1>& out) {
  const YAML::Node n = parent[key];
  if (!n) return;
  const std::string name = join(where, key);
  if (!n.IsSequence() || static_cast<int>(n.size()) != N) {
    throw ConfigError(name + " must be a list of " + std::to_string(N) + " numbers", line_of(n));
  }
  for (int i = 0; i < N; ++i) out(i) = scalar<double>(n[i], name);
}

inline void parse_vehicle(const YAML::Node& n, VehicleParams& p) {
  require_map(n, "vehicle");
  reject_unknown(n, "vehicle",
                 {"mass", "inertia", "arm_length", "thrust_coeff", "torque_coeff",
                  "translational_drag", "rotational_drag", "gravity"});
  read(n, "mass", "vehicle", p.mass);
  read_vector(n, "inertia", "vehicle", p.inertia);
  read(n, "arm_length", "vehicle", p.arm_length);
  read(n, "thrust_coeff", "vehicle", p.thrust_coeff);
  read(n, "torque_coeff", "vehicle", p.torque_coeff);
  read_vector(n, "translational_drag", "vehicle", p.translational_drag);
  read_vector(n, "rotational_drag", "vehicle", p.rotational_drag);
  read_vector(n, "gravity", "vehicle", p.gravity);
}

inline void parse_limits(const YAML::Node& n, ActuatorLimits& l) {
  require_map(n, "limits");
  reject_unknown(n, "limits",
                 {"rotor_speed_max", "rotor_speed_min", "tilt_max", "rotor_rate_max", "tilt_rate_max"});
  read(n, "rotor_speed_max", "limits", l.rotor_speed_max);
  read(n, "rotor_speed_min", "limits", l.rotor_speed_min);
  read(n, "tilt_max", "limits", l.tilt_max);
  read(n, "rotor_rate_max", "limits", l.rotor_rate_max);
  read(n, "tilt_rate_max", "limits", l.tilt_rate_max);
}

inline void parse_nmpc(const YAML::Node& n, NmpcConfig& c) {
  require_map(n, "nmpc");
  reject_unknown(n, "nmpc",
                 {"horizon", "prediction_dt", "max_substep", "state_weights", "input_weights",
                  "effort_reference", "max_sqp_iterations", "step_tolerance",
                  "constraint_tolerance", "slack_penalty"});
  read(n, "horizon", "nmpc", c.horizon);
  read(n, "prediction_dt", "nmpc", c.prediction_dt);
  read(n, "max_substep", "nmpc", c.max_substep);
  read_vector(n, "state_weights", "nmpc", c.state_weights);
  read_vector(n, "input_weights", "nmpc", c.input_weights);
  if (const YAML::Node e = n["effort_reference"]) {
    const auto s = scalar<std::string>(e, "nmpc.effort_reference");
    if (s == "feedforward") {
      c.effort_reference = EffortReference::kFeedforward;
    } else if (s == "zero") {
      c.effort_reference = EffortReference::kZero;
    } else {
      throw ConfigError("nmpc.effort_reference must be 'feedforward' or 'zero'", line_of(e));
    }
  }
  read(n, "max_sqp_iterations", "nmpc", c.max_sqp_iterations);
  read(n, "step_tolerance", "nmpc", c.step_tolerance);
  read(n, "constraint_tolerance", "nmpc", c.constraint_tolerance);
  read(n, "slack_penalty", "nmpc", c.slack_penalty);
}

inline void parse_lqr(const YAML::Node& n, LqrWeights& w) {
  require_map(n, "lqr");
  reject_unknown(n, "lqr", {"state_weights", "input_weights"});
  read_vector(n, "state_weights", "lqr", w.state);
  read_vector(n, "input_weights", "lqr", w.input);
}

inline void parse_smc(const YAML::Node& n, SmcDesign& d) {
  require_map(n, "smc");
  reject_unknown(n, "smc",
                 {"surface_slope_position", "surface_slope_attitude", "reaching_gain_position",
                  "reaching_gain_attitude", "boundary_layer_position", "boundary_layer_attitude"});
  read_vector(n, "surface_slope_position", "smc", d.surface_slope_position);
  read_vector(n, "surface_slope_attitude", "smc", d.surface_slope_attitude);
  read_vector(n, "reaching_gain_position", "smc", d.reaching_gain_position);
  read_vector(n, "reaching_gain_attitude", "smc", d.reaching_gain_attitude);
  read_vector(n, "boundary_layer_position", "smc", d.boundary_layer_position);
  read_vector(n, "boundary_layer_attitude", "smc", d.boundary_layer_attitude);
}

inline void parse_disturbance(const YAML::Node& n, RunConfig& c) {
  require_map(n, "disturbance");
  reject_unknown(n, "disturbance", {"enabled", "force_amplitude", "moment_amplitude", "time_offset"});
  if (const YAML::Node e = n["enabled"]) c.disturbance_enabled = scalar<bool>(e, "disturbance.enabled");
  read(n, "force_amplitude", "disturbance", c.disturbance.force_amplitude);
  read(n, "moment_amplitude", "disturbance", c.disturbance.moment_amplitude);
  read(n, "time_offset", "disturbance", c.disturbance.time_offset);
}

inline void parse_custom(const YAML::Node& n, CustomLemniscate& c) {
  require_map(n, "custom");
  reject_unknown(n, "custom", {"amplitude_x", "amplitude_y", "period", "altitude", "disturbance"});
  read(n, "amplitude_x", "custom", c.amplitude_x);
  read(n, "amplitude_y", "custom", c.amplitude_y);
  read(n, "period", "custom", c.period);
  read(n, "altitude", "custom", c.altitude);
  read(n, "disturbance", "custom", c.disturbance);
}

}  // namespace detail

/// Parses YAML text. An empty document yields the defaults.
inline RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("parse error: " + e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
  RunConfig c;
  if (root.IsNull()) return c;
  detail::require_map(root, "configuration root");
  detail::reject_unknown(root, "",
                         {"scenario", "controller", "dt", "duration", "seed", "output_dir",
                          "record_timing", "vehicle", "limits", "nmpc", "lqr", "smc",
                          "disturbance", "custom"});
  detail::read(root, "scenario", "", c.scenario);
  if (const YAML::Node n = root["controller"]) {
    try {
      c.controller = controller_from_string(detail::scalar<std::string>(n, "controller"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), detail::line_of(n));
    }
  }
  detail::read(root, "dt", "", c.sim.dt);
  if (const YAML::Node n = root["duration"]) c.duration = detail::scalar<double>(n, "duration");
  detail::read(root, "seed", "", c.sim.seed);
  detail::read(root, "output_dir", "", c.output_dir);
  detail::read(root, "record_timing", "", c.record_timing);
  if (const YAML::Node n = root["vehicle"]) detail::parse_vehicle(n, c.sim.params);
  if (const YAML::Node n = root["limits"]) detail::parse_limits(n, c.sim.limits);
  if (const YAML::Node n = root["nmpc"]) detail::parse_nmpc(n, c.sim.nmpc);
  if (const YAML::Node n = root["lqr"]) detail::parse_lqr(n, c.sim.lqr);
  if (const YAML::Node n = root["smc"]) detail::parse_smc(n, c.sim.smc);
  if (const YAML::Node n = root["disturbance"]) detail::parse_disturbance(n, c);
  if (const YAML::Node n = root["custom"]) detail::parse_custom(n, c.custom);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace tiltrotor
