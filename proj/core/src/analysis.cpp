#include "rpg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace rpg {

double horizon_weight(const PayoffGame& game) {
  double w = 0.0, d = 1.0;
  for (int t = 0; t < game.horizon; ++t) {
    w += d;
    d *= game.discount;
  }
  return w;
}

void check_simplex(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= -1e-9)) throw std::invalid_argument(what + ": negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(sum));
}

double exact_utility(const PayoffGame& game, std::span<const double> row_strategy,
                     std::span<const double> col_strategy, int player) {
  if (static_cast<int>(row_strategy.size()) != game.rows ||
      static_cast<int>(col_strategy.size()) != game.cols)
    throw std::invalid_argument("exact_utility: strategy size mismatch for game " + game.name);
  check_simplex(row_strategy, "exact_utility row strategy");
  check_simplex(col_strategy, "exact_utility col strategy");
  double u = 0.0;
  for (int r = 0; r < game.rows; ++r)
    for (int c = 0; c < game.cols; ++c)
      u += row_strategy[static_cast<size_t>(r)] * col_strategy[static_cast<size_t>(c)] *
           game.payoff(player, r, c);
  return horizon_weight(game) * u;
}

Value exact_utility(Tape& tape, const PayoffGame& game, std::span<const Value> row_probs,
                    std::span<const Value> col_probs, int player) {
  if (static_cast<int>(row_probs.size()) != game.rows ||
      static_cast<int>(col_probs.size()) != game.cols)
    throw std::invalid_argument("exact_utility: strategy size mismatch for game " + game.name);
  Value u = tape.constant(0.0);
  for (int r = 0; r < game.rows; ++r)
    for (int c = 0; c < game.cols; ++c) {
      const double pay = game.payoff(player, r, c);
      if (pay == 0.0) continue;
      u += row_probs[static_cast<size_t>(r)] * col_probs[static_cast<size_t>(c)] * pay;
    }
  return u * horizon_weight(game);
}

namespace {

// Single-shot payoff of each own pure action against a fixed opponent mix.
std::vector<double> action_payoffs(const PayoffGame& game, std::span<const double> opponent,
                                   int player) {
  const int own_n = player == 1 ? game.rows : game.cols;
  const int opp_n = player == 1 ? game.cols : game.rows;
  if (static_cast<int>(opponent.size()) != opp_n)
    throw std::invalid_argument("best_response: opponent strategy size mismatch");
  std::vector<double> u(static_cast<size_t>(own_n), 0.0);
  for (int a = 0; a < own_n; ++a)
    for (int o = 0; o < opp_n; ++o) {
      const double pay = player == 1 ? game.p1(a, o) : game.p2(o, a);
      u[static_cast<size_t>(a)] += opponent[static_cast<size_t>(o)] * pay;
    }
  return u;
}

std::vector<int> support_of(std::span<const double> strategy, double support_tol) {
  std::vector<int> s;
  for (size_t k = 0; k < strategy.size(); ++k)
    if (strategy[k] >= support_tol) s.push_back(static_cast<int>(k));
  if (s.empty()) {
    // degenerate: keep the argmax so the check stays meaningful
    s.push_back(static_cast<int>(
        std::max_element(strategy.begin(), strategy.end()) - strategy.begin()));
  }
  return s;
}

bool support_is_best_response(const PayoffGame& game, const std::vector<int>& support, int player,
                              std::span<const double> witness, double payoff_tol) {
  const std::vector<double> u = action_payoffs(game, witness, player);
  const double best = *std::max_element(u.begin(), u.end());
  for (int a : support)
    if (u[static_cast<size_t>(a)] < best - payoff_tol) return false;
  return true;
}

int co_action_count(const PayoffGame& game, int player) {
  return player == 1 ? game.cols : game.rows;
}

// Exact-indifference witnesses (e.g. uniform in a symmetric zero-sum game)
// sit at face barycenters that a 1/delta grid cannot represent; visit them
// in addition to the grid points.
void for_each_witness(int dims, double delta,
                      const std::function<void(std::span<const double>)>& visit) {
  for_each_simplex_point(dims, delta, visit);
  std::vector<double> point(static_cast<size_t>(dims), 0.0);
  for (unsigned mask = 1; mask < (1u << dims); ++mask) {
    const int support = __builtin_popcount(mask);
    for (int k = 0; k < dims; ++k)
      point[static_cast<size_t>(k)] = (mask >> k) & 1u ? 1.0 / support : 0.0;
    visit(point);
  }
}

}  // namespace

void for_each_simplex_point(int dims, double delta,
                            const std::function<void(std::span<const double>)>& visit) {
  if (delta <= 0.0) throw std::invalid_argument("simplex grid: delta must be positive");
  const int steps = std::max(1, static_cast<int>(std::lround(1.0 / delta)));
  std::vector<double> point(static_cast<size_t>(dims), 0.0);
  std::function<void(int, int)> rec = [&](int dim, int remaining) {
    if (dim == dims - 1) {
      point[static_cast<size_t>(dim)] = static_cast<double>(remaining) / steps;
      visit(point);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      point[static_cast<size_t>(dim)] = static_cast<double>(k) / steps;
      rec(dim + 1, remaining - k);
    }
  };
  rec(0, steps);
}

std::vector<int> best_response_set(const PayoffGame& game, std::span<const double> opponent,
                                   int player, double tie_tol) {
  check_simplex(opponent, "best_response opponent");
  const std::vector<double> u = action_payoffs(game, opponent, player);
  const double best = *std::max_element(u.begin(), u.end());
  std::vector<int> out;
  for (size_t a = 0; a < u.size(); ++a)
    if (u[a] >= best - tie_tol) out.push_back(static_cast<int>(a));
  return out;
}

RationalityReport rationality_check(const PayoffGame& game, std::span<const double> strategy,
                                    int player, double grid_delta, double support_tol,
                                    double payoff_tol) {
  if (grid_delta <= 0.0) throw std::invalid_argument("rationality_check: delta must be positive");
  check_simplex(strategy, "rationality_check strategy");
  const int co_n = co_action_count(game, player);
  if (co_n > 4)
    throw std::runtime_error("rationality oracle limit: co-player has " + std::to_string(co_n) +
                             " actions (grid search bound is 4)");

  RationalityReport report;
  report.support = support_of(strategy, support_tol);
  for_each_witness(co_n, grid_delta, [&](std::span<const double> witness) {
    if (report.rational) return;
    if (support_is_best_response(game, report.support, player, witness, payoff_tol)) {
      report.rational = true;
      report.witness.assign(witness.begin(), witness.end());
    }
  });
  return report;
}

bool rationality_support_oracle(const PayoffGame& game, std::span<const double> strategy,
                                int player, double grid_delta, double support_tol,
                                double payoff_tol) {
  check_simplex(strategy, "rationality_support_oracle strategy");
  const int own_n = player == 1 ? game.rows : game.cols;
  const int co_n = co_action_count(game, player);
  if (co_n > 4)
    throw std::runtime_error("rationality oracle limit: co-player has " + std::to_string(co_n) +
                             " actions (grid search bound is 4)");

  // feasible[mask]: some witness makes every action in mask simultaneously best
  std::vector<char> feasible(static_cast<size_t>(1) << own_n, 0);
  for_each_witness(co_n, grid_delta, [&](std::span<const double> witness) {
    const std::vector<double> u = action_payoffs(game, witness, player);
    const double best = *std::max_element(u.begin(), u.end());
    unsigned mask = 0;
    for (int a = 0; a < own_n; ++a)
      if (u[static_cast<size_t>(a)] >= best - payoff_tol) mask |= 1u << a;
    feasible[mask] = 1;
  });
  // a support is feasible when contained in some simultaneously-best set
  unsigned want = 0;
  for (int a : support_of(strategy, support_tol)) want |= 1u << a;
  for (size_t mask = 0; mask < feasible.size(); ++mask)
    if (feasible[mask] && (static_cast<unsigned>(mask) & want) == want) return true;
  return false;
}

double min_utility_vs_rational(const PayoffGame& game, std::span<const double> strategy,
                               int player, double grid_delta) {
  check_simplex(strategy, "min_utility_vs_rational strategy");
  const int co_player = player == 1 ? 2 : 1;
  const int co_n = co_action_count(game, player);
  double worst = std::numeric_limits<double>::infinity();
  for_each_simplex_point(co_n, grid_delta, [&](std::span<const double> co) {
    // grid points carry exact zeros, so the co-policy support is strict here
    if (!rationality_check(game, co, co_player, grid_delta, /*support_tol=*/1e-12).rational)
      return;
    const double u = player == 1 ? exact_utility(game, strategy, co, 1)
                                 : exact_utility(game, co, strategy, 2);
    worst = std::min(worst, u);
  });
  return worst;
}

}  // namespace rpg
