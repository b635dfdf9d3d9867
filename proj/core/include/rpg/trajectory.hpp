#pragma once
// Episode records. A trajectory stores joint actions, per-player rewards and,
// when the consuming loss needs them, log-probability tape references for the
// sampled actions. Matrix games have a single observation, index 0.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpg/game.hpp"
#include "rpg/rng.hpp"
#include "rpg/tape.hpp"

namespace rpg {

enum class Phase { lookahead, evaluation, partnerplay };

struct StepRecord {
  int obs = 0;
  int action_row = -1;
  int action_col = -1;
  double reward_row = 0.0;
  double reward_col = 0.0;
  Value logp_row{};  // invalid handle when that seat's gradient is not needed
  Value logp_col{};
};

struct Trajectory {
  int64_t episode_id = 0;
  std::string row_agent;
  std::string col_agent;
  Phase phase = Phase::evaluation;
  double weight = 1.0;
  std::vector<StepRecord> steps;
};

// Distribution of one seat plus optional per-action log-prob nodes.
struct SeatPolicy {
  std::vector<double> probs;
  std::vector<Value> logp;  // empty when no tape recording is wanted
};

// Samples `horizon` joint actions i.i.d. from the two seat distributions.
Trajectory sample_episode(const PayoffGame& game, const SeatPolicy& row, const SeatPolicy& col,
                          Rng& rng);

// Convenience form with a fresh seed and no log-prob recording.
Trajectory sample_episode(const PayoffGame& game, std::span<const double> row_probs,
                          std::span<const double> col_probs, uint64_t seed);

// Discounted return-to-go per step for one seat (0 = row, 1 = col).
std::vector<double> discounted_returns(const Trajectory& traj, int seat, double gamma);

}  // namespace rpg
