#include "rpg/trajectory.hpp"

#include <stdexcept>

#include "rpg/analysis.hpp"

namespace rpg {

Trajectory sample_episode(const PayoffGame& game, const SeatPolicy& row, const SeatPolicy& col,
                          Rng& rng) {
  if (static_cast<int>(row.probs.size()) != game.rows ||
      static_cast<int>(col.probs.size()) != game.cols)
    throw std::invalid_argument("sample_episode: policy size mismatch for game " + game.name);

  Trajectory traj;
  traj.steps.reserve(static_cast<size_t>(game.horizon));
  for (int t = 0; t < game.horizon; ++t) {
    StepRecord s;
    s.obs = 0;
    s.action_row = rng.categorical(row.probs);
    s.action_col = rng.categorical(col.probs);
    s.reward_row = game.p1(s.action_row, s.action_col);
    s.reward_col = game.p2(s.action_row, s.action_col);
    if (!row.logp.empty()) s.logp_row = row.logp[static_cast<size_t>(s.action_row)];
    if (!col.logp.empty()) s.logp_col = col.logp[static_cast<size_t>(s.action_col)];
    traj.steps.push_back(s);
  }
  return traj;
}

Trajectory sample_episode(const PayoffGame& game, std::span<const double> row_probs,
                          std::span<const double> col_probs, uint64_t seed) {
  check_simplex(row_probs, "sample_episode row policy");
  check_simplex(col_probs, "sample_episode col policy");
  SeatPolicy row{std::vector<double>(row_probs.begin(), row_probs.end()), {}};
  SeatPolicy col{std::vector<double>(col_probs.begin(), col_probs.end()), {}};
  Rng rng = Rng::seeded(seed);
  return sample_episode(game, row, col, rng);
}

std::vector<double> discounted_returns(const Trajectory& traj, int seat, double gamma) {
  std::vector<double> out(traj.steps.size(), 0.0);
  double acc = 0.0;
  for (size_t k = traj.steps.size(); k-- > 0;) {
    const StepRecord& s = traj.steps[k];
    acc = (seat == 0 ? s.reward_row : s.reward_col) + gamma * acc;
    out[k] = acc;
  }
  return out;
}

}  // namespace rpg
