#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tiltrotor/cli.hpp"

using namespace tiltrotor;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tiltrotor_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int config_error_line(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  for (const char* text : {"", "# nothing\n", "---\n"}) {
    const RunConfig c = parse_config(text);
    EXPECT_EQ(c.scenario, "sluggish");
    EXPECT_EQ(c.controller, ControllerKind::kNmpc);
    EXPECT_EQ(c.sim.dt, 0.02);
    EXPECT_EQ(c.sim.params.mass, 0.468);
    EXPECT_EQ(c.sim.nmpc.horizon, 5);
    EXPECT_EQ(c.sim.limits.rotor_speed_max, 10000.0);
    EXPECT_EQ(c.sim.nmpc.input_weights, Vector6::Constant(5e-4));
  }
}

TEST(Config, OverridesReachSolver) {
  const RunConfig c = parse_config(
      "scenario: agile\n"
      "controller: smc\n"
      "seed: 12\n"
      "nmpc:\n"
      "  horizon: 10\n"
      "  effort_reference: zero\n"
      "vehicle:\n"
      "  inertia: [0.005, 0.006, 0.009]\n"
      "disturbance:\n"
      "  enabled: false\n");
  EXPECT_EQ(c.scenario, "agile");
  EXPECT_EQ(c.controller, ControllerKind::kSmc);
  EXPECT_EQ(c.sim.seed, 12u);
  EXPECT_EQ(c.sim.nmpc.horizon, 10);
  EXPECT_EQ(c.sim.nmpc.effort_reference, EffortReference::kZero);
  EXPECT_EQ(c.sim.params.inertia, Vector3(0.005, 0.006, 0.009));
  const Scenario s = c.make_scenario();
  EXPECT_FALSE(s.disturbance.enabled);
  EXPECT_EQ(s.duration, 30.0);
  NmpcConfig cfg = c.sim.nmpc;
  cfg.dt = c.sim.dt;
  EXPECT_EQ(NmpcSolver(cfg, c.sim.params, c.sim.limits).config().horizon, 10);
}

TEST(Config, NegativeMassIsDomainError) {
  EXPECT_THROW(parse_config("vehicle:\n  mass: -1\n"), DomainError);
}

TEST(Config, UnknownKeysRejectedWithLine) {
  EXPECT_EQ(config_error_line("seed: 1\ncolour: red\n"), 2);
  EXPECT_EQ(config_error_line("nmpc:\n  horizon: 4\n  horizn: 5\n"), 3);
}

TEST(Config, TypeErrorsCarryLine) {
  EXPECT_EQ(config_error_line("dt: 0.02\nseed: many\n"), 2);
  EXPECT_EQ(config_error_line("vehicle:\n  inertia: [1, 2]\n"), 2);
  EXPECT_EQ(config_error_line("controller: pid\n"), 1);
}

TEST(Config, SyntaxErrorCarriesLine) {
  EXPECT_EQ(config_error_line("seed: 1\nnmpc: [1, 2\n"), 3);
}

TEST(Config, BadEnumerations) {
  EXPECT_THROW(parse_config("scenario: loop\n"), ConfigError);
  EXPECT_THROW(parse_config("nmpc:\n  effort_reference: some\n"), ConfigError);
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, CustomScenario) {
  const RunConfig c = parse_config(
      "scenario: custom\nduration: 12\ncustom:\n  amplitude_x: 2\n  period: 10\n  disturbance: true\n");
  const Scenario s = c.make_scenario();
  EXPECT_EQ(s.duration, 12.0);
  EXPECT_TRUE(s.disturbance.enabled);
  EXPECT_NEAR(s.reference(5.0).position.x(), 2.0, 1e-12);
}

TEST(Config, EchoReloadsToSameConfig) {
  RunConfig c = parse_config("scenario: hover-attitude\ncontroller: lqr\nseed: 5\nnmpc:\n  horizon: 7\n");
  const nlohmann::json echo = config_to_json(c, c.make_scenario());
  const RunConfig back = parse_config(echo.dump());
  EXPECT_EQ(config_to_json(back, back.make_scenario()), echo);
}

TEST(TraceCsv, RoundTripIsExact) {
  SimulationSettings s;
  s.seed = 9;
  Scenario sc = Scenario::agile();
  sc.duration = 0.5;
  const EpisodeTrace tr = run_episode(sc, ControllerKind::kNmpc, s);
  std::stringstream buf;
  write_trace_csv(buf, tr, true);
  const std::vector<TraceRow> rows = read_trace_csv(buf);
  ASSERT_EQ(rows.size(), tr.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& a = rows[i];
    const TraceRow& b = tr.rows[i];
    EXPECT_EQ(a.t, b.t);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.ref, b.ref);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.u_cmd, b.u_cmd);
    EXPECT_EQ(a.u_real, b.u_real);
    EXPECT_EQ(a.dist, b.dist);
    EXPECT_EQ(a.sqp_iters, b.sqp_iters);
    EXPECT_EQ(a.kkt_residual, b.kkt_residual);
    EXPECT_EQ(a.solve_ms, b.solve_ms);
  }
}

TEST(TraceCsv, HeaderHasUnitsAndAllColumns) {
  EpisodeTrace tr;
  std::stringstream buf;
  write_trace_csv(buf, tr);
  std::string header;
  std::getline(buf, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 55);
  EXPECT_EQ(header.rfind("t [s],x_pn [m]", 0), 0u);
  EXPECT_NE(header.find("u_real_b4 [rad]"), std::string::npos);
  EXPECT_NE(header.find("solve_ms [ms]"), std::string::npos);
}

TEST(TraceCsv, MalformedInputRejected) {
  std::stringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_trace_csv(bad_header), std::runtime_error);
  EpisodeTrace tr;
  tr.rows.resize(1);
  std::stringstream buf;
  write_trace_csv(buf, tr);
  std::string text = buf.str();
  text.back() = 'x';
  text += "\n";
  std::stringstream bad_number(text);
  EXPECT_THROW(read_trace_csv(bad_number), std::runtime_error);
}

TEST(Summary, FixedKeySet) {
  RunConfig c = parse_config("scenario: hover-attitude\ncontroller: smc\nduration: 0.2\n");
  const Scenario s = c.make_scenario();
  const EpisodeTrace tr = run_episode(s, c.controller, c.sim);
  const nlohmann::json j = summary_json(c, s, tr, compute_metrics(tr));
  std::set<std::string> keys;
  for (const auto& kv : j.items()) keys.insert(kv.key());
  EXPECT_EQ(keys, (std::set<std::string>{"version", "scenario", "controller", "aborted",
                                          "abort_reason", "metrics", "config"}));
  std::set<std::string> metric_keys;
  for (const auto& kv : j["metrics"].items()) metric_keys.insert(kv.key());
  EXPECT_EQ(metric_keys,
            (std::set<std::string>{"position_error_m", "attitude_error_rad", "saturation_fraction",
                                   "saturated_steps", "steps", "solve_ms_mean", "solve_ms_p99",
                                   "solve_ms_max", "control_effort", "max_stage0_violation",
                                   "solver_failures"}));
  EXPECT_EQ(j["version"], kVersion);
  EXPECT_EQ(j["config"]["duration"], 0.2);
}

TEST(Cli, RunWritesOutputsAndIsByteDeterministic) {
  RunConfig c = parse_config("scenario: sluggish\ncontroller: nmpc\nduration: 1\n");
  std::ostringstream log;
  c.output_dir = scratch("run_a").string();
  ASSERT_EQ(run_command(c, log), kExitOk) << log.str();
  const fs::path first = c.output_dir;
  c.output_dir = scratch("run_b").string();
  ASSERT_EQ(run_command(c, log), kExitOk) << log.str();
  const std::string csv = slurp(first / "trace.csv");
  EXPECT_EQ(csv, slurp(fs::path(c.output_dir) / "trace.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 51);
  const nlohmann::json j = nlohmann::json::parse(slurp(first / "summary.json"));
  EXPECT_EQ(j["metrics"]["steps"], 51);
}

TEST(Cli, UnwritableOutputIsIoError) {
  const fs::path blocker = scratch("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "file, not a directory";
  RunConfig c = parse_config("duration: 0.1\ncontroller: lqr\n");
  c.output_dir = (blocker / "out").string();
  std::ostringstream log;
  EXPECT_EQ(run_command(c, log), kExitIo);
  fs::remove(blocker);
}

TEST(Cli, AbortPropagates) {
  // A moment far beyond the actuators tumbles the vehicle through the pitch singularity.
  RunConfig c = parse_config(
      "duration: 5\ncontroller: lqr\ndisturbance:\n  enabled: true\n  moment_amplitude: 50\n");
  c.output_dir = scratch("abort").string();
  std::ostringstream log;
  EXPECT_EQ(run_command(c, log), kExitAborted) << log.str();
}

TEST(Cli, CompareRunsAllControllers) {
  RunConfig c = parse_config("scenario: hover-attitude\nduration: 0.5\n");
  c.output_dir = scratch("compare").string();
  std::ostringstream log;
  ASSERT_EQ(compare_command(c, log), kExitOk) << log.str();
  for (const char* k : {"nmpc", "lqr", "smc"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / k / "trace.csv")) << k;
    EXPECT_NE(log.str().find(std::string("\n") + k), std::string::npos) << k;
  }
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "comparison.txt"));
}
