#include "rpg/critic.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

std::string pairing_key(std::string_view a, std::string_view b) {
  return a <= b ? std::string(a) + "|" + std::string(b) : std::string(b) + "|" + std::string(a);
}

CriticParams make_critic(std::string pairing, int horizon, double lr) {
  CriticParams c;
  c.pairing = std::move(pairing);
  c.horizon = horizon;
  c.lr = lr;
  c.value_row.assign(static_cast<size_t>(horizon), 0.0);
  c.value_col.assign(static_cast<size_t>(horizon), 0.0);
  return c;
}

std::vector<double> gae_advantages(const Trajectory& traj, const CriticParams& critic,
                                   Seat reward_seat, double gamma, double gae_lambda) {
  const size_t T = traj.steps.size();
  if (static_cast<int>(T) > critic.horizon)
    throw std::invalid_argument("gae_advantages: critic horizon does not cover trajectory");
  std::vector<double> adv(T, 0.0);
  double next_adv = 0.0;
  for (size_t k = T; k-- > 0;) {
    const StepRecord& s = traj.steps[k];
    const double r = reward_seat == Seat::row ? s.reward_row : s.reward_col;
    const double v = critic.value(reward_seat, static_cast<int>(k));
    const double v_next = k + 1 < T ? critic.value(reward_seat, static_cast<int>(k) + 1) : 0.0;
    const double delta = r + gamma * v_next - v;
    next_adv = delta + gamma * gae_lambda * next_adv;
    adv[k] = next_adv;
  }
  return adv;
}

AdvantageBatch gae_advantage_batch(std::span<const Trajectory> trajs, const CriticParams& critic,
                                   Seat reward_seat, double gamma, double gae_lambda) {
  AdvantageBatch batch;
  batch.pairing = critic.pairing;
  batch.reward_seat = reward_seat;
  batch.advantages.reserve(trajs.size());
  for (const Trajectory& t : trajs)
    batch.advantages.push_back(gae_advantages(t, critic, reward_seat, gamma, gae_lambda));
  return batch;
}

namespace {
double fit_seat(std::vector<double>& values, std::span<const Trajectory> trajs, int seat,
                double gamma, double lr, double value_coef) {
  // gradient of 0.5 * mean_k (V(t_k) - G_k)^2 over all (trajectory, step) samples
  std::vector<double> grad(values.size(), 0.0);
  size_t n = 0;
  double loss = 0.0;
  for (const Trajectory& traj : trajs) {
    const std::vector<double> returns = discounted_returns(traj, seat, gamma);
    for (size_t t = 0; t < returns.size(); ++t) {
      const double err = values[t] - returns[t];
      grad[t] += err;
      loss += 0.5 * err * err;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  loss /= static_cast<double>(n);
  for (size_t t = 0; t < values.size(); ++t)
    values[t] -= lr * value_coef * grad[t] / static_cast<double>(n);
  return loss;
}
}  // namespace

double critic_update(CriticParams& critic, std::span<const Trajectory> trajs, double gamma,
                     double value_coef) {
  bool any = false;
  for (const Trajectory& t : trajs) any = any || !t.steps.empty();
  if (!any) throw std::runtime_error("critic_update: no data for pairing " + critic.pairing);
  const double loss_row = fit_seat(critic.value_row, trajs, 0, gamma, critic.lr, value_coef);
  const double loss_col = fit_seat(critic.value_col, trajs, 1, gamma, critic.lr, value_coef);
  return 0.5 * (loss_row + loss_col);
}

void normalize_advantages(std::span<AdvantageBatch*> group) {
  size_t n = 0;
  double sum = 0.0;
  for (AdvantageBatch* b : group)
    for (const std::vector<double>& traj : b->advantages)
      for (double a : traj) {
        sum += a;
        ++n;
      }
  if (n == 0) throw std::invalid_argument("normalize_advantages: empty group");
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (AdvantageBatch* b : group)
    for (const std::vector<double>& traj : b->advantages)
      for (double a : traj) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n));
  for (AdvantageBatch* b : group) {
    b->norm_mean = mean;
    b->norm_std = stddev;
    for (std::vector<double>& traj : b->advantages)
      for (double& a : traj) a = (a - mean) / (stddev + 1e-8);
  }
}

}  // namespace rpg
