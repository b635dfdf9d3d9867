#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "rpg/algorithms.hpp"
#include "rpg/crossplay.hpp"
#include "rpg/training.hpp"

using namespace rpg;

namespace {

const PayoffGame& game(const char* name) { return *find_builtin(name); }

int count_nodes(const ObjectiveGraph& g, Role role) {
  int n = 0;
  for (const AgentNode& node : g.nodes) n += node.role == role;
  return n;
}

AlgorithmSpec spec_of(AlgorithmKind kind, int population = 2) {
  AlgorithmSpec s;
  s.kind = kind;
  s.population = population;
  if (needs_victim_checkpoint(kind)) s.victim_checkpoint = "placeholder.ckpt";
  return s;
}

StrategyPair pure_pair(int rows, int r, int cols, int c) {
  std::vector<double> row(static_cast<size_t>(rows), 0.0), col(static_cast<size_t>(cols), 0.0);
  row[static_cast<size_t>(r)] = 1.0;
  col[static_cast<size_t>(c)] = 1.0;
  return {row, col};
}

PolicyCheckpoint pair_ckpt(const std::string& id, std::vector<double> row,
                           std::vector<double> col) {
  PolicyCheckpoint c;
  c.agent_id = id;
  c.seats.push_back({Seat::row, std::move(row)});
  c.seats.push_back({Seat::col, std::move(col)});
  return c;
}

}  // namespace

TEST_SUITE("algorithms") {

TEST_CASE("node counts across the family") {
  CHECK(build_graph(spec_of(AlgorithmKind::sp, 1), 0.0).nodes.size() == 1);
  CHECK(build_graph(spec_of(AlgorithmKind::ap), 0.0).nodes.size() == 2);
  CHECK(build_graph(spec_of(AlgorithmKind::at), 0.0).nodes.size() == 2);
  CHECK(build_graph(spec_of(AlgorithmKind::paired), 0.0).nodes.size() == 3);
  CHECK(build_graph(spec_of(AlgorithmKind::ap_rpg), 0.0).nodes.size() == 3);
  CHECK(build_graph(spec_of(AlgorithmKind::at_rpg), 0.0).nodes.size() == 3);
  CHECK(build_graph(spec_of(AlgorithmKind::paired_rpg), 0.0).nodes.size() == 4);
  CHECK(build_graph(spec_of(AlgorithmKind::paired_a_rpg), 0.0).nodes.size() == 4);
  for (int m : {2, 3, 5}) {
    const ObjectiveGraph g = build_graph(spec_of(AlgorithmKind::ad_rpg, m), 0.0);
    CHECK(g.nodes.size() == static_cast<size_t>(2 * m));
    CHECK(count_nodes(g, Role::manipulator) == m);
  }
}

TEST_CASE("every constructor validates cleanly") {
  const std::vector<AlgorithmKind> kinds{
      AlgorithmKind::sp,     AlgorithmKind::ap,           AlgorithmKind::at,
      AlgorithmKind::paired, AlgorithmKind::ad,           AlgorithmKind::ap_rpg,
      AlgorithmKind::at_rpg, AlgorithmKind::paired_rpg,   AlgorithmKind::paired_a_rpg,
      AlgorithmKind::ad_rpg};
  for (AlgorithmKind kind : kinds) {
    for (double eps : {0.0, 0.1}) {
      const ObjectiveGraph g = build_graph(spec_of(kind), eps);
      const std::vector<std::string> findings = validate_graph(g);
      CHECK_MESSAGE(findings.empty(), algorithm_name(kind),
                    findings.empty() ? "" : findings.front());
    }
  }
}

TEST_CASE("sp with one member is a single self-evaluation edge") {
  const ObjectiveGraph g = build_graph(spec_of(AlgorithmKind::sp, 1), 0.0);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].weight == 1.0);
  CHECK(g.edges[0].first == g.edges[0].second);
  CHECK(g.edges[0].phase == EdgePhase::evaluation);
}

TEST_CASE("at and at-rpg differ by the manipulator and edge rerouting") {
  const ObjectiveGraph at = build_graph(spec_of(AlgorithmKind::at), 0.0);
  const ObjectiveGraph rpg = build_graph(spec_of(AlgorithmKind::at_rpg), 0.0);
  CHECK(at.nodes.size() + 1 == rpg.nodes.size());
  CHECK(count_nodes(at, Role::manipulator) == 0);
  CHECK(count_nodes(rpg, Role::manipulator) == 1);

  // baseline: the adversarial edge hangs directly off the base adversary
  bool baseline_direct = false;
  for (const Edge& e : at.edges)
    baseline_direct = baseline_direct ||
                      (e.owner == "adversary" && e.weight == -1.0 && e.reward_of == "victim");
  CHECK(baseline_direct);

  // rpg variant: the adversary trains only against its manipulator, and the
  // minus-one edge belongs to the manipulator
  for (const Edge& e : rpg.edges) {
    if (e.owner == "adversary") CHECK(e.reward_of == "adversary");
    if (e.weight == -1.0) CHECK(e.owner == "adversary.manip");
  }
}

TEST_CASE("ad-rpg cross edges carry -lambda/(m-1)") {
  AlgorithmSpec spec = spec_of(AlgorithmKind::ad_rpg, 2);
  spec.lambda_diversity = 0.25;
  const ObjectiveGraph g = build_graph(spec, 0.0);
  int cross = 0;
  for (const Edge& e : g.edges) {
    if (e.owner.find(".manip") == std::string::npos) continue;
    if (e.first == e.second) {
      CHECK(e.weight == 1.0);
    } else {
      CHECK(e.weight == doctest::Approx(-0.25));
      ++cross;
    }
  }
  CHECK(cross == 2);  // one per manipulator at m=2
}

TEST_CASE("partner-play weights split the eps budget") {
  const ObjectiveGraph g = build_graph(spec_of(AlgorithmKind::paired_rpg), 0.1);
  double partner_total = 0.0, lookahead_weight = 0.0;
  for (const Edge& e : g.edges) {
    if (e.owner != "adversary") continue;
    if (e.phase == EdgePhase::partnerplay) partner_total += e.weight;
    if (e.phase == EdgePhase::lookahead_train) lookahead_weight = e.weight;
  }
  CHECK(partner_total == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(lookahead_weight == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("paired protagonist and antagonist stay out of the lookahead") {
  const ObjectiveGraph g = build_graph(spec_of(AlgorithmKind::paired_rpg), 0.0);
  for (const AgentNode& n : g.nodes) {
    if (n.id == "protagonist" || n.id == "antagonist") CHECK_FALSE(n.in_lookahead);
    if (n.id == "adversary") CHECK(n.in_lookahead);
  }
  // the attack variant freezes the protagonist
  const ObjectiveGraph a = build_graph(spec_of(AlgorithmKind::paired_a_rpg), 0.0);
  int frozen = 0;
  for (const AgentNode& n : a.nodes) frozen += !n.trainable;
  CHECK(frozen == 1);
  for (const Edge& e : a.edges) CHECK(e.owner != "protagonist");
}

TEST_CASE("spec validation catches misuse") {
  AlgorithmSpec ap;
  ap.kind = AlgorithmKind::ap;
  CHECK_THROWS_WITH_AS(ap.validate(), doctest::Contains("victim checkpoint"),
                       std::invalid_argument);
  AlgorithmSpec ad;
  ad.kind = AlgorithmKind::ad_rpg;
  ad.population = 1;
  CHECK_THROWS_WITH_AS(ad.validate(), doctest::Contains("population"), std::invalid_argument);
  CHECK_THROWS_AS((void)algorithm_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("diversity objective values on the appendix game") {
  const PayoffGame& g = game("appB_sabotage");
  // rational diverse solution {(A,C), (B,F)}
  std::vector<StrategyPair> rational{pure_pair(2, 0, 4, 0), pure_pair(2, 1, 4, 3)};
  CHECK(ad_objective_value(rational, g, 0.25) == doctest::Approx(2.0).epsilon(1e-12));
  // sabotage solution {(A,D), (B,E)} scores higher under the objective
  std::vector<StrategyPair> sabotage{pure_pair(2, 0, 4, 1), pure_pair(2, 1, 4, 2)};
  CHECK(ad_objective_value(sabotage, g, 0.25) == doctest::Approx(2.3).epsilon(1e-12));
  CHECK(ad_objective_value(sabotage, g, 0.25) > ad_objective_value(rational, g, 0.25));
}

TEST_CASE("identical population members collapse to (1-lambda) m U") {
  const PayoffGame& g = game("fig11_coop");
  std::vector<StrategyPair> pop{pure_pair(2, 0, 3, 2), pure_pair(2, 0, 3, 2)};
  const double u = exact_utility(g, pop[0].first, pop[0].second, 1);
  CHECK(ad_objective_value(pop, g, 0.25) == doctest::Approx((1.0 - 0.25) * 2.0 * u));
}

TEST_CASE("diversity objective is invariant under population permutation") {
  const PayoffGame& g = game("appB_sabotage");
  std::vector<StrategyPair> pop{pure_pair(2, 0, 4, 0), pure_pair(2, 1, 4, 3),
                                pure_pair(2, 0, 4, 1)};
  const double v1 = ad_objective_value(pop, g, 0.4);
  std::swap(pop[0], pop[2]);
  const double v2 = ad_objective_value(pop, g, 0.4);
  std::swap(pop[1], pop[2]);
  const double v3 = ad_objective_value(pop, g, 0.4);
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  CHECK(v1 == doctest::Approx(v3).epsilon(1e-12));
}

TEST_CASE("diversity objective rejects non-cooperative games") {
  std::vector<StrategyPair> pop{pure_pair(2, 0, 2, 0), pure_pair(2, 1, 2, 1)};
  CHECK_THROWS_AS((void)ad_objective_value(pop, game("fig12_chicken"), 0.25),
                  std::invalid_argument);
}

TEST_CASE("crossplay: single checkpoint gives its self-play utility") {
  const PayoffGame& g = game("fig2_coop");
  std::vector<PolicyCheckpoint> ckpts{pair_ckpt("solo", {9.0, -9.0}, {9.0, -9.0, -9.0})};
  const CrossPlayGrid grid = crossplay_eval(ckpts, g, 0, 1);
  REQUIRE(grid.labels.size() == 1);
  CHECK(grid.at(0, 0) == doctest::Approx(1.0).epsilon(1e-3));  // near-pure (A, C)
}

TEST_CASE("crossplay reproduces the sabotage solution structure") {
  const PayoffGame& g = game("appB_sabotage");
  // the {(A,D), (B,E)} population: self-play 0.9, cross-play -1
  std::vector<PolicyCheckpoint> ckpts{pair_ckpt("m0", {20, -20}, {-20, 20, -20, -20}),
                                      pair_ckpt("m1", {-20, 20}, {-20, -20, 20, -20})};
  const CrossPlayGrid grid = crossplay_eval(ckpts, g, 0, 1);
  CHECK(grid.at(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(grid.at(1, 1) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(grid.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(grid.at(1, 0) == doctest::Approx(-1.0).epsilon(1e-6));

  // exact and monte-carlo agree within 0.02 per cell
  const CrossPlayGrid mc = crossplay_eval(ckpts, g, 100000, 7);
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 2; ++j) CHECK(std::abs(mc.at(i, j) - grid.at(i, j)) < 0.02);

  // grids of exact utilities are bit-identical across runs
  const CrossPlayGrid again = crossplay_eval(ckpts, g, 0, 99);
  for (size_t k = 0; k < 4; ++k) CHECK(again.mean[k] == grid.mean[k]);
}

TEST_CASE("crossplay rejects shape mismatches") {
  const PayoffGame& g = game("fig2_coop");
  std::vector<PolicyCheckpoint> ckpts{pair_ckpt("bad", {1.0, 2.0, 3.0}, {0.0, 0.0, 0.0})};
  CHECK_THROWS_WITH_AS((void)crossplay_eval(ckpts, g, 0, 1), doctest::Contains("logits"),
                       std::invalid_argument);
}

TEST_CASE("audit flags the sabotage column and passes the rational one") {
  const PayoffGame& g = game("fig2_coop");
  PolicyCheckpoint sab;
  sab.agent_id = "adversary";
  sab.seats.push_back({Seat::col, {-9.0, -9.0, 9.0}});  // near-pure E
  PolicyCheckpoint ok;
  ok.agent_id = "adversary";
  ok.seats.push_back({Seat::col, {9.0, 9.0, -9.0}});  // mix over C, D

  const AuditReport flagged = sabotage_audit(std::vector<PolicyCheckpoint>{sab}, g);
  REQUIRE(flagged.verdicts.size() == 1);
  CHECK_FALSE(flagged.verdicts[0].rational);
  CHECK_FALSE(flagged.all_rational());

  const AuditReport passed = sabotage_audit(std::vector<PolicyCheckpoint>{ok}, g);
  REQUIRE(passed.verdicts.size() == 1);
  CHECK(passed.verdicts[0].rational);
  CHECK_FALSE(passed.verdicts[0].witness.empty());
  CHECK(passed.text().find("rational") != std::string::npos);
}

TEST_CASE("audit on appB flags the dominated column of an (A,D) pair") {
  const PayoffGame& g = game("appB_sabotage");
  std::vector<PolicyCheckpoint> ckpts{pair_ckpt("m0", {20, -20}, {-20, 20, -20, -20})};
  const AuditReport report = sabotage_audit(ckpts, g);
  REQUIRE(report.verdicts.size() == 2);
  CHECK(report.verdicts[0].rational);        // row seat playing A
  CHECK_FALSE(report.verdicts[1].rational);  // col seat playing dominated D
}

TEST_CASE("zero-sum: audits of trained rps adversaries never flag") {
  // in zero-sum games the rationality constraint is vacuous; spot-check that
  // a spread of column strategies all pass
  const PayoffGame& g = game("fig13_rps");
  Rng rng = Rng::seeded(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> logits{rng.next_normal() * 3, rng.next_normal() * 3,
                               rng.next_normal() * 3};
    PolicyCheckpoint c;
    c.agent_id = "adversary";
    c.seats.push_back({Seat::col, logits});
    CHECK(sabotage_audit(std::vector<PolicyCheckpoint>{c}, g).all_rational());
  }
}

TEST_CASE("convergence detector") {
  ConvergenceDetector det(5, 0.01);
  std::vector<std::vector<double>> moving{{0.5, 0.5}};
  for (int k = 0; k < 10; ++k) {
    moving[0][0] = 0.5 + 0.1 * (k % 2 ? 1 : -1);
    moving[0][1] = 1.0 - moving[0][0];
    det.observe(moving);
  }
  CHECK_FALSE(det.converged());
  CHECK(det.trailing_movement() > 0.05);

  ConvergenceDetector det2(5, 0.01);
  for (int k = 0; k < 4; ++k) det2.observe({{0.3, 0.7}});
  CHECK_FALSE(det2.converged());  // window not yet full
  det2.observe({{0.3, 0.7}});
  CHECK(det2.converged());
}

TEST_CASE("training runs end to end and reports checkpoints") {
  AlgorithmSpec spec = spec_of(AlgorithmKind::at);
  spec.seed = 3;
  TrainOptions opts;
  opts.mode = RunMode::exact;
  opts.steps = 40;
  opts.checkpoint_interval = 20;
  int checkpoints = 0, steps_seen = 0;
  RunResult result = run_training(
      spec, game("fig2_coop"), opts,
      [&](int64_t, const StepMetrics&) { ++steps_seen; },
      [&](int64_t, const ObjectiveGraph&, const PolicySet&) { ++checkpoints; });
  CHECK(result.steps_run == 40);
  CHECK(steps_seen == 40);
  CHECK(checkpoints == 3);  // two periodic plus the final one
  CHECK(result.outcome == "budget-exhausted");
}

TEST_CASE("sequential AD stages train one member at a time") {
  const ObjectiveGraph stage0 = build_sequential_ad_stage(spec_of(AlgorithmKind::ad), 0);
  CHECK(stage0.nodes.size() == 1);
  CHECK(stage0.edges.size() == 1);
  const ObjectiveGraph stage1 = build_sequential_ad_stage(spec_of(AlgorithmKind::ad), 1);
  CHECK(stage1.nodes.size() == 2);
  CHECK_FALSE(stage1.find("member0")->trainable);
  CHECK(stage1.find("member1")->trainable);
  CHECK(validate_graph(stage0).empty());
  CHECK(validate_graph(stage1).empty());

  AlgorithmSpec spec = spec_of(AlgorithmKind::ad);
  spec.sequential_ad = true;
  spec.seed = 5;
  TrainOptions opts;
  opts.mode = RunMode::exact;
  opts.steps = 40;
  RunResult r = run_training(spec, game("appB_sabotage"), opts);
  CHECK(r.steps_run == 40);  // 20 per stage
  CHECK(r.policies.by_id.count("member0.col") == 1);
  CHECK(r.policies.by_id.count("member1.col") == 1);

  AlgorithmSpec bad = spec_of(AlgorithmKind::ad_rpg);
  bad.sequential_ad = true;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("training with zero steps emits only the initial checkpoint") {
  AlgorithmSpec spec = spec_of(AlgorithmKind::at);
  TrainOptions opts;
  opts.mode = RunMode::exact;
  opts.steps = 0;
  int checkpoints = 0;
  RunResult result = run_training(spec, game("fig2_coop"), opts, {},
                                  [&](int64_t, const ObjectiveGraph&, const PolicySet&) {
                                    ++checkpoints;
                                  });
  CHECK(result.outcome == "budget-exhausted");
  CHECK(result.steps_run == 0);
  CHECK(checkpoints == 1);
}

}  // TEST_SUITE("algorithms")
