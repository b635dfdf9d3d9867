#pragma once
// Cross-play grids between trained checkpoints and the rationality audit of
// converged strategies.

#include <span>
#include <string>
#include <vector>

#include "rpg/analysis.hpp"
#include "rpg/policy.hpp"
#include "rpg/trajectory.hpp"

namespace rpg {

struct CrossPlayGrid {
  std::vector<std::string> labels;
  int episodes_per_cell = 0;  // 0 = exact utilities
  // n x n row-major; cell (i, j) averages the seatings available between the
  // two checkpoints, mean of both players' rewards
  std::vector<double> mean;
  // per-seat sub-results: i seated as row vs j as col, and the reverse;
  // NaN when that seating does not exist
  std::vector<double> seat_ij;
  std::vector<double> seat_ji;

  double at(size_t i, size_t j) const { return mean[i * labels.size() + j]; }
};

// episodes_per_cell == 0 evaluates exact utilities; otherwise Monte-Carlo
// means over that many episodes per seating. Throws on checkpoint/game shape
// mismatch or when a pairing has no seat-compatible rollout.
CrossPlayGrid crossplay_eval(std::span<const PolicyCheckpoint> checkpoints,
                             const PayoffGame& game, int episodes_per_cell, uint64_t seed);

std::string grid_csv(const CrossPlayGrid& grid);

struct AuditVerdict {
  std::string agent;
  Seat seat = Seat::row;
  bool rational = false;
  std::vector<double> probs;
  std::vector<double> witness;  // present when rational
};

struct AuditReport {
  std::vector<AuditVerdict> verdicts;
  bool all_rational() const;
  std::string text() const;  // one verdict line per agent seat
};

// Runs the rationality oracle on each checkpointed strategy. Oracle-limit
// errors (co-player action count beyond the grid bound) propagate.
AuditReport sabotage_audit(std::span<const PolicyCheckpoint> checkpoints, const PayoffGame& game,
                           double grid_delta = 0.01, double support_tol = 0.05);

}  // namespace rpg
