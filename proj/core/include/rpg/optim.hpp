#pragma once
// SGD and Adam in ascent convention: every objective in this codebase is
// maximized, a step adds lr * update. Two forms of the same rule: an on-tape
// step whose output parameters stay differentiable (used during lookahead),
// and a plain step that advances persistent state (outer updates).

#include <cstdint>
#include <span>
#include <vector>

#include "rpg/tape.hpp"

namespace rpg {

enum class OptimizerKind { sgd, adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Persistent per-policy state. Adam moments match the parameter vector shape.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  int64_t step_count = 0;
  AdamParams adam;
  std::vector<double> m;
  std::vector<double> v;

  void ensure_size(size_t n);
};

// Lookahead mirror of OptimizerState with moments carried as tape nodes, so
// the manipulator sees the true inner update including moment dynamics.
struct TapeOptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  int64_t step_count = 0;
  AdamParams adam;
  std::vector<Value> m;
  std::vector<Value> v;
};

TapeOptimizerState lift_state(Tape& tape, const OptimizerState& state, size_t n);

// One ascent step expressed entirely in tape ops. Advances `state` in place
// (step count and on-tape moments). Throws std::invalid_argument on shape
// mismatch or negative lr.
std::vector<Value> optimizer_step(Tape& tape, std::span<const Value> params,
                                  std::span<const Value> grads, TapeOptimizerState& state,
                                  double lr);

// Plain ascent step; same arithmetic on doubles.
void apply_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                double lr);

}  // namespace rpg
