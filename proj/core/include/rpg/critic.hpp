#pragma once
// Tabular critics and advantage estimation. One critic per evaluated pairing
// of agents; it carries a value table per (observation, timestep) for each
// seat, since general-sum games have distinct reward streams per seat.
// Critic parameters never sit on a differentiation path.

#include <span>
#include <string>
#include <vector>

#include "rpg/policy.hpp"
#include "rpg/trajectory.hpp"

namespace rpg {

struct CriticParams {
  std::string pairing;  // canonical unordered agent-id pair, "a|b"
  int horizon = 1;
  double lr = 1.0;
  std::vector<double> value_row;  // indexed by timestep (single observation)
  std::vector<double> value_col;

  double value(Seat seat, int t) const {
    const std::vector<double>& v = seat == Seat::row ? value_row : value_col;
    return v[static_cast<size_t>(t)];
  }
};

std::string pairing_key(std::string_view a, std::string_view b);
CriticParams make_critic(std::string pairing, int horizon, double lr);

struct AdvantageBatch {
  std::string pairing;
  Seat reward_seat = Seat::row;
  std::vector<std::vector<double>> advantages;  // [trajectory][step]
  double norm_mean = 0.0;  // stats applied by the last normalization
  double norm_std = 1.0;
};

// Generalized advantage recursion: delta_t = r_t + gamma V_{t+1} - V_t,
// A_t = delta_t + gamma lambda A_{t+1}, terminal V = 0.
std::vector<double> gae_advantages(const Trajectory& traj, const CriticParams& critic,
                                   Seat reward_seat, double gamma, double gae_lambda);

AdvantageBatch gae_advantage_batch(std::span<const Trajectory> trajs, const CriticParams& critic,
                                   Seat reward_seat, double gamma, double gae_lambda);

// One gradient step on value_coef * 0.5 * MSE(value, empirical discounted
// returns), both seats. Returns the pre-update 0.5*MSE averaged over seats.
// Throws std::runtime_error on an empty batch.
double critic_update(CriticParams& critic, std::span<const Trajectory> trajs, double gamma,
                     double value_coef);

// Pools every batch in the group (one agent's training partners together),
// subtracts the pooled mean and divides by pooled std + 1e-8.
void normalize_advantages(std::span<AdvantageBatch*> group);

}  // namespace rpg
