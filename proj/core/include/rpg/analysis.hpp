#pragma once
// Exact expected utilities, best-response sets, and the rationality oracle
// (is a strategy a best response to at least one co-strategy?).
//
// Policies are memoryless and sampled i.i.d. per step, so the utility of an
// iterated game factors into (sum of discounts) * single-shot expectation.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rpg/game.hpp"
#include "rpg/tape.hpp"

namespace rpg {

// sum_{t < horizon} discount^t
double horizon_weight(const PayoffGame& game);

// Throws std::invalid_argument unless p is a distribution within 1e-9.
void check_simplex(std::span<const double> p, const std::string& what);

// Expected discounted utility for `player` (1 = row, 2 = col).
double exact_utility(const PayoffGame& game, std::span<const double> row_strategy,
                     std::span<const double> col_strategy, int player);

// Same expectation built from tape nodes; differentiable in both strategies.
Value exact_utility(Tape& tape, const PayoffGame& game, std::span<const Value> row_probs,
                    std::span<const Value> col_probs, int player);

// All own pure actions within tie_tol of the best utility against the fixed
// opponent strategy. Any mixture over the returned set is a best response.
std::vector<int> best_response_set(const PayoffGame& game, std::span<const double> opponent,
                                   int player, double tie_tol = 1e-9);

struct RationalityReport {
  bool rational = false;
  std::vector<int> support;        // actions with probability >= support_tol
  std::vector<double> witness;     // co-strategy certifying rationality when found
};

// Grid search over the co-strategy simplex at resolution grid_delta. Rational
// iff some co-strategy makes every support action within payoff_tol of the
// best own payoff. Throws when the co-player has more than 4 actions (grid
// oracle limit).
RationalityReport rationality_check(const PayoffGame& game, std::span<const double> strategy,
                                    int player, double grid_delta = 0.01,
                                    double support_tol = 0.05, double payoff_tol = 1e-6);

// Independent route to the same question: precompute which support sets are
// best-response-feasible, then look up the strategy's support. Used to
// cross-check rationality_check, not by it.
bool rationality_support_oracle(const PayoffGame& game, std::span<const double> strategy,
                                int player, double grid_delta = 0.01, double support_tol = 0.05,
                                double payoff_tol = 1e-6);

// min over rational co-strategies (on the grid) of this player's utility.
double min_utility_vs_rational(const PayoffGame& game, std::span<const double> strategy,
                               int player, double grid_delta = 0.01);

// Enumerates distributions over `dims` points at resolution delta (all
// compositions of round(1/delta)). Includes every vertex of the simplex.
void for_each_simplex_point(int dims, double delta,
                            const std::function<void(std::span<const double>)>& visit);

}  // namespace rpg
