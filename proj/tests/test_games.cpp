#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rpg/analysis.hpp"
#include "rpg/game.hpp"
#include "rpg/policy.hpp"
#include "rpg/rng.hpp"
#include "rpg/trajectory.hpp"

using namespace rpg;

namespace {
const PayoffGame& game(const char* name) {
  const PayoffGame* g = find_builtin(name);
  REQUIRE(g != nullptr);
  return *g;
}
std::vector<double> pure(int n, int a) {
  std::vector<double> p(static_cast<size_t>(n), 0.0);
  p[static_cast<size_t>(a)] = 1.0;
  return p;
}
std::vector<double> uniform(int n) {
  return std::vector<double>(static_cast<size_t>(n), 1.0 / n);
}
}  // namespace

TEST_SUITE("games") {

TEST_CASE("built-in payoff matrices are exact") {
  const PayoffGame& fig2 = game("fig2_coop");
  CHECK(fig2.rows == 2);
  CHECK(fig2.cols == 3);
  CHECK(fig2.payoff1 == std::vector<double>{1, 0, -1, 0, 1, -1});
  CHECK(fig2.common_payoff());

  const PayoffGame& sab = game("appB_sabotage");
  CHECK(sab.cols == 4);
  CHECK(sab.payoff1 == std::vector<double>{1, 0.9, -1, 0, 0, -1, 0.9, 1});
  CHECK(sab.common_payoff());

  const PayoffGame& bach = game("fig10_bach");
  CHECK(bach.payoff1 == std::vector<double>{3, 0, -1, 1, 2, -1});
  CHECK(bach.payoff2 == std::vector<double>{2, 0, -1, 1, 3, -1});
  CHECK_FALSE(bach.common_payoff());
  CHECK_FALSE(bach.zero_sum());

  const PayoffGame& coop = game("fig11_coop");
  CHECK(coop.payoff1 == std::vector<double>{0.9, 0, 1, 0, 0.9, 1});
  CHECK(coop.common_payoff());

  const PayoffGame& chicken = game("fig12_chicken");
  CHECK(chicken.payoff1 == std::vector<double>{0, -1, 1, -10});
  CHECK(chicken.payoff2 == std::vector<double>{0, 1, -1, -10});

  const PayoffGame& rps = game("fig13_rps");
  CHECK(rps.zero_sum());
  CHECK(rps.payoff1 == std::vector<double>{0, -1, 1, 1, 0, -1, -1, 1, 0});
  CHECK(builtin_games().size() == 6);
}

TEST_CASE("exact utility on fig2") {
  const PayoffGame& g = game("fig2_coop");
  CHECK(exact_utility(g, pure(2, 0), pure(3, 0), 1) == doctest::Approx(1.0));
  // uniform rows against column D: (0 + 1) / 2
  CHECK(exact_utility(g, uniform(2), pure(3, 1), 1) == doctest::Approx(0.5));

  PayoffGame zero = g;
  zero.name = "zero";
  zero.payoff1.assign(zero.payoff1.size(), 0.0);
  zero.payoff2 = zero.payoff1;
  CHECK(exact_utility(zero, uniform(2), uniform(3), 1) == 0.0);
}

TEST_CASE("exact utility rejects non-simplex inputs") {
  const PayoffGame& g = game("fig2_coop");
  CHECK_THROWS_AS((void)exact_utility(g, std::vector<double>{0.5, 0.6}, pure(3, 0), 1), std::invalid_argument);
  CHECK_THROWS_AS((void)exact_utility(g, std::vector<double>{-0.1, 1.1}, pure(3, 0), 1), std::invalid_argument);
}

TEST_CASE("exact utility is bilinear") {
  const PayoffGame& g = game("fig10_bach");
  Rng rng = Rng::seeded(7);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> p1{rng.next_double(), 0}, p2{rng.next_double(), 0};
    p1[1] = 1 - p1[0];
    p2[1] = 1 - p2[0];
    std::vector<double> q(3);
    double s = 0;
    for (double& x : q) s += (x = rng.next_double());
    for (double& x : q) x /= s;
    const double alpha = rng.next_double();
    std::vector<double> mix(2);
    for (size_t k = 0; k < 2; ++k) mix[k] = alpha * p1[k] + (1 - alpha) * p2[k];
    const double lhs = exact_utility(g, mix, q, 1);
    const double rhs =
        alpha * exact_utility(g, p1, q, 1) + (1 - alpha) * exact_utility(g, p2, q, 1);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("zero-sum utilities are antisymmetric") {
  const PayoffGame& g = game("fig13_rps");
  Rng rng = Rng::seeded(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> p(3), q(3);
    double sp = 0, sq = 0;
    for (double& x : p) sp += (x = rng.next_double());
    for (double& x : q) sq += (x = rng.next_double());
    for (double& x : p) x /= sp;
    for (double& x : q) x /= sq;
    CHECK(exact_utility(g, p, q, 1) == -exact_utility(g, p, q, 2));
  }
}

TEST_CASE("iterated utility factors into a geometric sum") {
  PayoffGame g = game("fig2_coop");
  g.horizon = 5;
  g.discount = 0.9;
  const double w = 1 + 0.9 + 0.81 + 0.729 + 0.6561;
  CHECK(horizon_weight(g) == doctest::Approx(w).epsilon(1e-12));
  CHECK(exact_utility(g, uniform(2), pure(3, 1), 1) == doctest::Approx(0.5 * w));
}

TEST_CASE("tape utility matches the double path and differentiates") {
  const PayoffGame& g = game("fig2_coop");
  auto build = [&](Tape& t, std::span<const Value> leaves) {
    std::vector<Value> row = softmax(leaves.subspan(0, 2));
    std::vector<Value> col = softmax(leaves.subspan(2, 3));
    return exact_utility(t, g, row, col, 1);
  };
  const std::vector<double> logits{0.3, -0.2, 0.1, 0.4, -0.5};
  FiniteDiffReport r = finite_diff_check(build, logits, 1e-5);
  CHECK(r.max_rel_err < 1e-6);

  Tape t;
  std::vector<Value> leaves;
  for (double v : logits) leaves.push_back(t.leaf(v));
  std::vector<Value> row = softmax(std::span<const Value>(leaves).subspan(0, 2));
  std::vector<Value> col = softmax(std::span<const Value>(leaves).subspan(2, 3));
  const double expect =
      exact_utility(g, std::vector<double>{row[0].val(), row[1].val()},
                    std::vector<double>{col[0].val(), col[1].val(), col[2].val()}, 1);
  CHECK(exact_utility(t, g, row, col, 1).val() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("best responses on fig2") {
  const PayoffGame& g = game("fig2_coop");
  // column player responds to pure A -> C
  CHECK(best_response_set(g, pure(2, 0), 2) == std::vector<int>{0});
  // column player responds to pure B -> D
  CHECK(best_response_set(g, pure(2, 1), 2) == std::vector<int>{1});
  // row player responds to pure E -> tie between A and B
  CHECK(best_response_set(g, pure(3, 2), 1) == std::vector<int>{0, 1});
}

TEST_CASE("best-response members dominate non-members") {
  Rng rng = Rng::seeded(23);
  for (const PayoffGame& g : builtin_games()) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> opp(static_cast<size_t>(g.rows));
      double s = 0;
      for (double& x : opp) s += (x = rng.next_double());
      for (double& x : opp) x /= s;
      const std::vector<int> br = best_response_set(g, opp, 2);
      double best = -1e18, other = -1e18;
      for (int c = 0; c < g.cols; ++c) {
        const double u = exact_utility(g, opp, pure(g.cols, c), 2);
        if (std::find(br.begin(), br.end(), c) != br.end())
          best = std::max(best, u);
        else
          other = std::max(other, u);
      }
      CHECK(best >= other - 1e-9);
    }
  }
}

TEST_CASE("rationality on fig2 matches the worked example") {
  const PayoffGame& g = game("fig2_coop");
  // pure E is never a best response
  CHECK_FALSE(rationality_check(g, pure(3, 2), 2).rational);
  // pure D is justified by the victim playing B
  RationalityReport d = rationality_check(g, pure(3, 1), 2);
  CHECK(d.rational);
  REQUIRE(d.witness.size() == 2);
  CHECK(exact_utility(g, d.witness, pure(3, 1), 2) >=
        exact_utility(g, d.witness, pure(3, 0), 2) - 1e-6);
  CHECK(d.witness[1] > 0.5);  // witness leans on B
}

TEST_CASE("strictly dominated appB columns are irrational") {
  const PayoffGame& g = game("appB_sabotage");
  CHECK_FALSE(rationality_check(g, pure(4, 1), 2).rational);  // D
  CHECK_FALSE(rationality_check(g, pure(4, 2), 2).rational);  // E
  CHECK(rationality_check(g, pure(4, 0), 2).rational);        // C
  CHECK(rationality_check(g, pure(4, 3), 2).rational);        // F
}

TEST_CASE("rationality grid oracle agrees with the support-enumeration oracle") {
  Rng rng = Rng::seeded(99);
  for (const PayoffGame& g : builtin_games()) {
    for (int player : {1, 2}) {
      const int n = player == 1 ? g.rows : g.cols;
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> strat(static_cast<size_t>(n));
        double s = 0;
        // mix of near-pure and interior strategies
        for (double& x : strat) s += (x = std::pow(rng.next_double(), 3.0) + 1e-4);
        for (double& x : strat) x /= s;
        const bool a = rationality_check(g, strat, player).rational;
        const bool b = rationality_support_oracle(g, strat, player);
        CHECK(a == b);
      }
    }
  }
}

TEST_CASE("rationality oracle refuses wide co-action spaces") {
  PayoffGame g = game("fig2_coop");
  g.name = "wide";
  g.cols = 5;
  g.payoff1.assign(10, 0.0);
  g.payoff2 = g.payoff1;
  // row player's co-player has 5 actions: beyond the grid bound
  CHECK_THROWS_WITH_AS((void)rationality_check(g, std::vector<double>{0.5, 0.5}, 1),
                       doctest::Contains("oracle limit"), std::runtime_error);
}

TEST_CASE("fig2 uniform victim earns at least 0.45 against rational co-policies") {
  const PayoffGame& g = game("fig2_coop");
  const double v = min_utility_vs_rational(g, uniform(2), 1, 0.02);
  CHECK(v >= 0.45);
  CHECK(v == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("sampling: pure policies give constant trajectories") {
  const PayoffGame& g = game("fig2_coop");
  Trajectory t = sample_episode(g, pure(2, 1), pure(3, 1), 42);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].action_row == 1);
  CHECK(t.steps[0].action_col == 1);
  CHECK(t.steps[0].reward_row == 1.0);  // matrix entry (B, D)
}

TEST_CASE("sampling is deterministic in the seed") {
  const PayoffGame& g = game("fig13_rps");
  for (uint64_t seed : {1ull, 77ull, 123456ull}) {
    Trajectory a = sample_episode(g, uniform(3), uniform(3), seed);
    Trajectory b = sample_episode(g, uniform(3), uniform(3), seed);
    CHECK(a.steps[0].action_row == b.steps[0].action_row);
    CHECK(a.steps[0].action_col == b.steps[0].action_col);
  }
}

TEST_CASE("monte-carlo mean reward approaches the exact expectation") {
  const PayoffGame& g = game("fig2_coop");
  // exact expectation of uniform x uniform is (1+0-1+0+1-1)/6 = 0
  double sum = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k)
    sum += sample_episode(g, uniform(2), uniform(3), 1000 + static_cast<uint64_t>(k))
               .steps[0]
               .reward_row;
  CHECK(std::abs(sum / n) < 0.03);
}

TEST_CASE("monte-carlo utility converges within 3 sigma at 1e5 episodes") {
  const PayoffGame& g = game("fig10_bach");
  const std::vector<double> p{0.6, 0.4}, q{0.2, 0.5, 0.3};
  const double exact = exact_utility(g, p, q, 1);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  Rng rng = Rng::seeded(5150);
  SeatPolicy row{p, {}}, col{q, {}};
  for (int k = 0; k < n; ++k) {
    const double r = sample_episode(g, row, col, rng).steps[0].reward_row;
    sum += r;
    sumsq += r * r;
  }
  const double mean = sum / n;
  const double sigma = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(mean - exact) < 3.0 * sigma + 1e-9);
}

TEST_CASE("game file round trip and error diagnostics") {
  const PayoffGame& g = game("fig10_bach");
  PayoffGame back = parse_game_text(serialize_game(g));
  CHECK(back.payoff1 == g.payoff1);
  CHECK(back.payoff2 == g.payoff2);
  CHECK(back.horizon == g.horizon);

  PayoffGame zs = parse_game_text(
      "name = mini\nrows = 2\ncols = 2\npayoff1 = 1 -1 -1 1\npayoff2 = zerosum\n");
  CHECK(zs.zero_sum());

  CHECK_THROWS_WITH_AS((void)parse_game_text("rows = 2\ncols = 2\npayoff1 = 1 2 3 4\n"),
                       doctest::Contains("missing required field"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      (void)parse_game_text("name = x\nrows = 2\ncols = 2\npayoff1 = 1 2 3\npayoff2 = common\n"),
      doctest::Contains("shape"), std::invalid_argument);
  CHECK_THROWS_WITH_AS((void)parse_game_text("name = x\nbogus_line_without_equals\n"),
                       doctest::Contains("line 2"), std::invalid_argument);
}

}  // TEST_SUITE("games")
