#pragma once
// Experiment orchestration behind the CLI: seeded runs with metric CSVs and
// checkpoints, cross-play grids, parameter sweeps over a worker pool, the
// check suites, and the sabotage audit.
//
// Exit codes: 0 success, 1 usage, 2 numerical failure, 3 check-suite failure.

#include <ostream>
#include <string>
#include <vector>

#include "rpg/checks.hpp"
#include "rpg/config.hpp"
#include "rpg/crossplay.hpp"

namespace rpg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitCheckFailed = 3;

inline constexpr const char* kMetricsSchema = "rpg-metrics-v1";

struct RunRecord {
  uint64_t config_hash = 0;
  uint64_t seed = 0;
  std::string outcome;
  bool oscillating = false;
  int64_t steps_run = 0;
  int64_t converged_at = -1;
  double wall_clock_sec = 0.0;
  std::string run_dir;
  std::string metrics_path;
  std::string final_checkpoint_dir;
  std::string diagnostic;

  std::string summary_line() const;
};

// Executes one run per seed, writing metrics.csv, checkpoints and summary.txt
// under out_dir/<run name>/seed<k>/. Returns kExitNumerical if any seed
// diverged.
int cli_run(const ExperimentConfig& cfg, std::ostream& log,
            std::vector<RunRecord>* records = nullptr);

// Cross-play grid over checkpoint files (simple '*' globs allowed).
int cli_crossplay(const std::vector<std::string>& checkpoint_patterns, const PayoffGame& game,
                  int episodes_per_cell, uint64_t seed, const std::string& out_csv,
                  std::ostream& log);

// Cartesian product of config overrides, parallel across a worker pool; one
// run directory per combination and a sweep_summary.csv keyed by the varied
// parameters.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};
int cli_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& grid, int jobs,
              std::ostream& log);

// suite: "grad" | "oracle" | "dice" | "all"
int cli_check(const std::string& suite, double h, uint64_t seed, std::ostream& out);

int cli_audit(const std::vector<std::string>& checkpoint_patterns, const PayoffGame& game,
              double grid_delta, double support_tol, std::ostream& out);

// '*' wildcard in the filename component; a pattern without '*' must exist.
std::vector<std::string> expand_glob(const std::string& pattern);

// Writes one file per agent into dir (created if needed).
std::vector<std::string> write_checkpoints(const std::string& dir, const ObjectiveGraph& graph,
                                           const PolicySet& policies);

}  // namespace rpg
