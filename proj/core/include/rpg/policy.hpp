#pragma once
// Tabular softmax policies. Matrix games have one observation, so a policy is
// a single logit vector; probabilities lie on the simplex by construction.
// The softmax helpers are templated so the same expression serves plain
// doubles (oracles, evaluation) and tape values (training).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rpg/optim.hpp"
#include "rpg/tape.hpp"

namespace rpg {

enum class Role { base, manipulator };
enum class Seat { row, col };

struct PolicyParams {
  std::string id;
  Role role = Role::base;
  Seat seat = Seat::row;
  bool trainable = true;
  std::vector<double> logits;
  OptimizerState opt;
};

namespace detail {
inline double scalar_of(double x) { return x; }
inline double scalar_of(const Value& x) { return x.val(); }
inline double lift_like(double, double c) { return c; }
inline Value lift_like(const Value& like, double c) { return like.tape->constant(c); }
}  // namespace detail

template <class S>
std::vector<S> log_softmax(std::span<const S> logits) {
  using std::exp;
  using std::log;
  double mx = detail::scalar_of(logits[0]);
  for (const S& x : logits) mx = std::max(mx, detail::scalar_of(x));
  // constant shift: exact gradients by translation invariance
  S shift = detail::lift_like(logits[0], mx);
  S denom = detail::lift_like(logits[0], 0.0);
  std::vector<S> shifted;
  shifted.reserve(logits.size());
  for (const S& x : logits) {
    shifted.push_back(x - shift);
    denom += exp(shifted.back());
  }
  S log_denom = log(denom);
  for (S& x : shifted) x = x - log_denom;
  return shifted;
}

template <class S>
std::vector<S> softmax(std::span<const S> logits) {
  using std::exp;
  std::vector<S> out = log_softmax(logits);
  for (S& x : out) x = exp(x);
  return out;
}

// Shannon entropy in nats, safe against vanishing probabilities.
template <class S>
S entropy(std::span<const S> logits) {
  using std::exp;
  std::vector<S> logp = log_softmax(logits);
  S h = detail::lift_like(logits[0], 0.0);
  for (const S& lp : logp) h += exp(lp) * lp;
  return -h;
}

std::vector<double> policy_probs(const PolicyParams& policy);

// Lifts logits onto a tape: leaves when trainable, constants when frozen.
std::vector<Value> lift_logits(Tape& tape, std::span<const double> logits, bool trainable);

// log pi(action) as a differentiable tape node.
Value policy_log_prob(std::span<const Value> logits, int action);

// Differentiable entropy of the policy distribution.
Value entropy_bonus(std::span<const Value> logits);

// Checkpoint: one file per agent, plain text, stable field layout.
struct PolicyCheckpoint {
  std::string agent_id;
  Role role = Role::base;
  bool trainable = true;
  struct SeatLogits {
    Seat seat;
    std::vector<double> logits;
  };
  std::vector<SeatLogits> seats;

  const std::vector<double>* seat_logits(Seat s) const;
};

void save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt);
PolicyCheckpoint load_checkpoint(const std::string& path);

}  // namespace rpg
