#pragma once
// Training orchestration: runs the update loop for an algorithm spec with
// convergence detection over the base policies' probability movement.

#include <functional>
#include <string>
#include <vector>

#include "rpg/algorithms.hpp"

namespace rpg {

double total_variation(std::span<const double> a, std::span<const double> b);

// Converged when every tracked policy stayed inside a TV ball of the given
// radius for a full window of steps.
class ConvergenceDetector {
 public:
  ConvergenceDetector(int window, double tv_threshold);

  void observe(const std::vector<std::vector<double>>& policy_probs);
  bool converged() const;
  // largest per-policy TV between the newest snapshot and any in the window
  double trailing_movement() const;

 private:
  int window_;
  double threshold_;
  std::vector<std::vector<std::vector<double>>> ring_;  // [slot][policy][prob]
  size_t next_ = 0;
  size_t count_ = 0;
};

struct TrainOptions {
  TrainConfig train;
  RunMode mode = RunMode::sampled;
  int64_t steps = 3000;
  double init_scale = 0.5;
  int convergence_window = 200;
  double convergence_tv = 0.01;
  int64_t checkpoint_interval = 0;  // 0 = final checkpoint only
};

struct RunResult {
  std::string outcome;  // "converged" | "budget-exhausted" | "diverged"
  bool oscillating = false;
  int64_t steps_run = 0;
  int64_t converged_at = -1;
  std::string diagnostic;
  ObjectiveGraph graph;
  PolicySet policies;
};

using StepCallback = std::function<void(int64_t step, const StepMetrics&)>;
using CheckpointCallback =
    std::function<void(int64_t step, const ObjectiveGraph&, const PolicySet&)>;

// Runs the step budget (early-stopping on convergence), emitting metrics per
// step and checkpoints at the configured interval plus a final one. A
// non-finite gradient aborts with outcome "diverged" and the last good
// parameters.
RunResult run_training(const AlgorithmSpec& spec, const PayoffGame& game,
                       const TrainOptions& opts, const StepCallback& on_step = {},
                       const CheckpointCallback& on_checkpoint = {});

}  // namespace rpg
