#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tiltrotor/cli.hpp"

namespace {

struct Flags {
  std::string scenario;
  std::string controller;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  bool timing = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--scenario", f.scenario, "sluggish, agile, hover-attitude or custom")
      ->check(CLI::IsMember({"sluggish", "agile", "hover-attitude", "custom"}));
  cmd->add_option("--config", f.config, "YAML file with overrides")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "disturbance phase seed");
  cmd->add_option("--duration", f.duration, "episode length [s]");
  cmd->add_flag("--record-timing", f.timing, "write measured solve times into trace.csv");
}

// Flags win over the file.
tiltrotor::RunConfig resolve(const Flags& f) {
  tiltrotor::RunConfig c = f.config.empty() ? tiltrotor::RunConfig{} : tiltrotor::load_config(f.config);
  if (!f.scenario.empty()) c.scenario = f.scenario;
  if (!f.controller.empty()) c.controller = tiltrotor::controller_from_string(f.controller);
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.seed) c.sim.seed = *f.seed;
  if (f.duration) c.duration = *f.duration;
  if (f.timing) c.record_timing = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiltrotor NMPC simulator"};
  app.set_version_flag("--version", tiltrotor::kVersion);
  app.require_subcommand(1);

  Flags run_flags;
  CLI::App* run = app.add_subcommand("run", "simulate one controller");
  add_common(run, run_flags);
  run->add_option("--controller", run_flags.controller, "nmpc, lqr or smc")
      ->check(CLI::IsMember({"nmpc", "lqr", "smc"}));

  Flags cmp_flags;
  CLI::App* compare = app.add_subcommand("compare", "simulate all three controllers");
  add_common(compare, cmp_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? tiltrotor::kExitOk : tiltrotor::kExitUsage;
  }

  const bool is_run = run->parsed();
  tiltrotor::RunConfig cfg;
  try {
    cfg = resolve(is_run ? run_flags : cmp_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tiltrotor::kExitConfig;
  }
  return is_run ? tiltrotor::run_command(cfg, std::cout) : tiltrotor::compare_command(cfg, std::cout);
}
