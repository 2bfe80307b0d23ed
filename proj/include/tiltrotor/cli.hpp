#pragma once

// `run` and `compare` without the argument parsing, so tests can drive them.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "tiltrotor/config.hpp"
#include "tiltrotor/io.hpp"
#include "tiltrotor/simulation.hpp"

namespace tiltrotor {

enum ExitCode : int {
  kExitOk = 0,
  kExitAborted = 1,  // simulation ended early
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunResult {
  EpisodeTrace trace;
  MetricsSummary metrics;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out.flush()) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

/// Runs one episode and writes trace.csv and summary.json into `dir`.
inline RunResult run_to_dir(const RunConfig& c, const std::filesystem::path& dir) {
  ensure_dir(dir);
  const Scenario scenario = c.make_scenario();
  RunResult r;
  r.trace = run_episode(scenario, c.controller, c.sim);
  r.metrics = compute_metrics(r.trace);
  {
    std::ofstream out(dir / "trace.csv", std::ios::binary);
    if (!out) throw IoError("cannot write '" + (dir / "trace.csv").string() + "'");
    write_trace_csv(out, r.trace, c.record_timing);
    if (!out.flush()) throw IoError("write failed for trace.csv");
  }
  write_text_file(dir / "summary.json", summary_json(c, scenario, r.trace, r.metrics).dump(2) + "\n");
  return r;
}

inline int run_command(const RunConfig& c, std::ostream& log) {
  try {
    const RunResult r = run_to_dir(c, c.output_dir);
    log << to_string(c.controller) << " on " << r.trace.scenario << ": " << r.trace.rows.size()
        << " rows, position RMSE " << r.metrics.position.rmse_total << " m, attitude RMSE "
        << r.metrics.attitude.rmse_total << " rad\n";
    if (r.trace.aborted) {
      log << "error: " << r.trace.abort_reason << "\n";
      return kExitAborted;
    }
    return kExitOk;
  } catch (const IoError& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RiccatiNonConvergence& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

/// All three controllers on the same scenario and seed, sequentially.
/// Outputs go to <output_dir>/<controller>/ plus comparison.txt.
inline int compare_command(const RunConfig& base, std::ostream& log) {
  try {
    const std::filesystem::path root = base.output_dir;
    ensure_dir(root);
    std::vector<std::pair<std::string, MetricsSummary>> table;
    bool aborted = false;
    for (ControllerKind k : {ControllerKind::kNmpc, ControllerKind::kLqr, ControllerKind::kSmc}) {
      RunConfig c = base;
      c.controller = k;
      const RunResult r = run_to_dir(c, root / to_string(k));
      if (r.trace.aborted) {
        log << to_string(k) << ": " << r.trace.abort_reason << "\n";
        aborted = true;
      }
      table.emplace_back(to_string(k), r.metrics);
    }
    const std::string text = comparison_table(table);
    write_text_file(root / "comparison.txt", text);
    log << text;
    return aborted ? kExitAborted : kExitOk;
  } catch (const IoError& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RiccatiNonConvergence& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace tiltrotor
