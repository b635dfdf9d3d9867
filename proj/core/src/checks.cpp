#include "rpg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpg/algorithms.hpp"
#include "rpg/analysis.hpp"
#include "rpg/rng.hpp"
#include "rpg/training.hpp"

namespace rpg {

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-12);
}

// ---------------------------------------------------------------------------
// Closed-form oracle for the exact lookahead dynamics. Independent of the
// tape: softmax, utilities and policy gradients are written out by hand, and
// the manipulator gradient is taken by central differences through the whole
// inner-update composition.
// ---------------------------------------------------------------------------

using LogitMap = std::map<std::string, std::vector<double>>;

std::vector<double> oracle_softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) z += (p[k] = std::exp(logits[k] - mx));
  for (double& v : p) v /= z;
  return p;
}

struct OracleDynamics {
  const ObjectiveGraph& graph;
  const PayoffGame& game;
  const TrainConfig& cfg;

  double hweight() const {
    double w = 0.0, d = 1.0;
    for (int t = 0; t < game.horizon; ++t) {
      w += d;
      d *= game.discount;
    }
    return w;
  }

  // single-shot expectation p^T M q for the seat the edge scores
  double pair_value(const Edge& e, const RolloutDirection& d, const LogitMap& th) const {
    const std::vector<double> p = oracle_softmax(th.at(d.row->row_policy));
    const std::vector<double> q = oracle_softmax(th.at(d.col->col_policy));
    const int player = d.row->id == e.reward_of ? 1 : 2;
    double u = 0.0;
    for (int r = 0; r < game.rows; ++r)
      for (int c = 0; c < game.cols; ++c)
        u += p[static_cast<size_t>(r)] * q[static_cast<size_t>(c)] * game.payoff(player, r, c);
    return u;
  }

  double edge_value(const Edge& e, const LogitMap& th) const {
    const std::vector<RolloutDirection> dirs = rollout_directions(graph, e);
    double sum = 0.0;
    for (const RolloutDirection& d : dirs) sum += pair_value(e, d, th);
    return hweight() * sum / static_cast<double>(dirs.size());
  }

  double agent_objective(const AgentNode& agent, const LogitMap& th) const {
    double total = 0.0;
    for (const Edge* e : graph.edges_of(agent.id))
      if (e->weight != 0.0) total += e->weight * edge_value(*e, th);
    if (cfg.entropy_coef != 0.0 && agent.role == Role::base) {
      for (const std::string* pid : {&agent.row_policy, &agent.col_policy}) {
        if (pid->empty()) continue;
        const std::vector<double> p = oracle_softmax(th.at(*pid));
        double hsum = 0.0;
        for (double v : p)
          if (v > 0) hsum -= v * std::log(v);
        total += cfg.entropy_coef * hsum;
      }
    }
    return total;
  }

  // hand-written policy-gradient identities:
  //   dU/da_i = p_i ((M q)_i - p^T M q)  for the row seat
  //   dU/db_j = q_j ((M^T p)_j - p^T M q) for the col seat
  //   dH/da_i = -p_i (log p_i + H)
  std::vector<double> policy_grad(const AgentNode& agent, const std::string& pid,
                                  const LogitMap& th) const {
    std::vector<double> g(th.at(pid).size(), 0.0);
    for (const Edge* e : graph.edges_of(agent.id)) {
      if (e->weight == 0.0) continue;
      const std::vector<RolloutDirection> dirs = rollout_directions(graph, *e);
      const double scale = e->weight * hweight() / static_cast<double>(dirs.size());
      for (const RolloutDirection& d : dirs) {
        const std::vector<double> p = oracle_softmax(th.at(d.row->row_policy));
        const std::vector<double> q = oracle_softmax(th.at(d.col->col_policy));
        const int player = d.row->id == e->reward_of ? 1 : 2;
        double u = 0.0;
        for (int r = 0; r < game.rows; ++r)
          for (int c = 0; c < game.cols; ++c)
            u += p[static_cast<size_t>(r)] * q[static_cast<size_t>(c)] *
                 game.payoff(player, r, c);
        if (d.row->row_policy == pid) {
          for (int i = 0; i < game.rows; ++i) {
            double mq = 0.0;
            for (int c = 0; c < game.cols; ++c)
              mq += game.payoff(player, i, c) * q[static_cast<size_t>(c)];
            g[static_cast<size_t>(i)] += scale * p[static_cast<size_t>(i)] * (mq - u);
          }
        }
        if (d.col->col_policy == pid) {
          for (int j = 0; j < game.cols; ++j) {
            double mp = 0.0;
            for (int r = 0; r < game.rows; ++r)
              mp += game.payoff(player, r, j) * p[static_cast<size_t>(r)];
            g[static_cast<size_t>(j)] += scale * q[static_cast<size_t>(j)] * (mp - u);
          }
        }
      }
    }
    if (cfg.entropy_coef != 0.0 && agent.role == Role::base) {
      const std::vector<double> p = oracle_softmax(th.at(pid));
      double hsum = 0.0;
      for (double v : p)
        if (v > 0) hsum -= v * std::log(v);
      for (size_t i = 0; i < p.size(); ++i)
        g[i] += cfg.entropy_coef * (-p[i] * (std::log(std::max(p[i], 1e-300)) + hsum));
    }
    return g;
  }

  LogitMap lookahead(LogitMap th) const {
    for (int iter = 0; iter < cfg.lookahead.lookahead_n; ++iter) {
      LogitMap next = th;
      for (const AgentNode& n : graph.nodes) {
        if (n.role != Role::base || !n.trainable || !n.in_lookahead) continue;
        for (const std::string* pid : {&n.row_policy, &n.col_policy}) {
          if (pid->empty()) continue;
          const std::vector<double> g = policy_grad(n, *pid, th);
          std::vector<double>& dst = next[*pid];
          for (size_t k = 0; k < g.size(); ++k)
            dst[k] += cfg.lookahead.lr_base_lookahead * g[k];
        }
      }
      th = std::move(next);
    }
    return th;
  }

  double manipulator_objective(const AgentNode& manip, const LogitMap& th0) const {
    const LogitMap th = lookahead(th0);
    double total = 0.0;
    for (const Edge* e : graph.edges_of(manip.id))
      if (e->weight != 0.0) total += e->weight * edge_value(*e, th);
    return total;
  }
};

LogitMap logits_of(const PolicySet& policies) {
  LogitMap out;
  for (const auto& [id, p] : policies.by_id) out[id] = p.logits;
  return out;
}

CheckResult manip_higher_order_check(const AlgorithmSpec& spec, const PayoffGame& game,
                                     double h, double tol, const std::string& name) {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.lookahead.lookahead_n = 2;
  ObjectiveGraph graph = build_graph(spec, cfg.lookahead.partnerplay_eps);
  PolicySet policies = make_policies(graph, spec, game, 0.6);

  const std::map<std::string, std::vector<double>> analytic =
      manipulator_gradients(graph, game, policies, nullptr, cfg, RunMode::exact, Rng::seeded(0));

  OracleDynamics oracle{graph, game, cfg};
  LogitMap th0 = logits_of(policies);
  double worst = 0.0;
  for (const AgentNode& n : graph.nodes) {
    if (n.role != Role::manipulator) continue;
    const std::vector<double>& a = analytic.at(n.id);
    size_t off = 0;
    for (const std::string* pid : {&n.row_policy, &n.col_policy}) {
      if (pid->empty()) continue;
      std::vector<double>& mine = th0[*pid];
      for (size_t k = 0; k < mine.size(); ++k, ++off) {
        const double saved = mine[k];
        mine[k] = saved + h;
        const double up = oracle.manipulator_objective(n, th0);
        mine[k] = saved - h;
        const double down = oracle.manipulator_objective(n, th0);
        mine[k] = saved;
        const double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(a[off], numeric));
      }
    }
  }
  CheckResult r;
  r.name = name;
  r.metric = worst;
  r.pass = worst < tol;
  std::ostringstream d;
  d << "max rel err " << worst << " (tol " << tol << ", lookahead 2, central diff h=" << h << ")";
  r.detail = d.str();
  return r;
}

}  // namespace

std::vector<CheckResult> check_grad_suite(double h) {
  const double tol = std::max(1e-5, 100.0 * h * h);
  std::vector<CheckResult> out;
  Rng rng = Rng::seeded(4242);

  for (const PayoffGame& g : builtin_games()) {
    auto build = [&g](Tape& t, std::span<const Value> leaves) {
      std::vector<Value> row = softmax(leaves.subspan(0, static_cast<size_t>(g.rows)));
      std::vector<Value> col =
          softmax(leaves.subspan(static_cast<size_t>(g.rows), static_cast<size_t>(g.cols)));
      return exact_utility(t, g, row, col, 1) + 0.5 * exact_utility(t, g, row, col, 2);
    };
    std::vector<double> logits(static_cast<size_t>(g.rows + g.cols));
    for (double& x : logits) x = rng.next_normal();
    const FiniteDiffReport r = finite_diff_check(build, logits, h);
    out.push_back({"exact-utility-fd:" + g.name, r.max_rel_err < tol, r.max_rel_err,
                   "max rel err vs central differences"});
  }

  {
    auto build = [](Tape&, std::span<const Value> leaves) {
      return policy_log_prob(leaves, 1) + 0.3 * entropy_bonus(leaves);
    };
    const std::vector<double> logits{0.4, -0.9, 0.2};
    const FiniteDiffReport r = finite_diff_check(build, logits, h);
    out.push_back({"log-prob-entropy-fd", r.max_rel_err < tol, r.max_rel_err,
                   "log pi and entropy gradients"});
  }

  for (OptimizerKind kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    auto build = [kind](Tape& t, std::span<const Value> leaves) {
      Value p = leaves[0], theta = leaves[1];
      auto g = t.backward(p * theta, std::vector<Value>{p}, true);
      TapeOptimizerState st;
      st.kind = kind;
      if (kind == OptimizerKind::adam) {
        st.step_count = 1;
        st.m = {t.constant(0.2)};
        st.v = {t.constant(0.5)};
      }
      auto updated =
          optimizer_step(t, std::vector<Value>{p}, std::vector<Value>{g.grads[0]}, st, 0.1);
      return updated[0] * updated[0];
    };
    const std::vector<double> params{1.3, 0.7};
    const FiniteDiffReport r = finite_diff_check(build, params, h);
    out.push_back({std::string("optimizer-flow-") + (kind == OptimizerKind::sgd ? "sgd" : "adam"),
                   r.max_rel_err < tol, r.max_rel_err,
                   "gradient through the differentiable update"});
  }

  {
    AlgorithmSpec spec;
    spec.kind = AlgorithmKind::at_rpg;
    spec.seed = 321;
    out.push_back(manip_higher_order_check(spec, *find_builtin("fig2_coop"), h, tol,
                                           "manip-higher-order:at-rpg:fig2_coop"));
  }
  {
    AlgorithmSpec spec;
    spec.kind = AlgorithmKind::ad_rpg;
    spec.population = 2;
    spec.seed = 654;
    out.push_back(manip_higher_order_check(spec, *find_builtin("appB_sabotage"), h, tol,
                                           "manip-higher-order:ad-rpg:appB_sabotage"));
  }
  return out;
}

std::vector<CheckResult> check_oracle_suite(uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng = Rng::seeded(seed).fork("oracle-suite");

  {
    int agreements = 0, total = 0;
    for (const PayoffGame& g : builtin_games()) {
      for (int player : {1, 2}) {
        const int n = player == 1 ? g.rows : g.cols;
        for (int trial = 0; trial < 9; ++trial) {
          std::vector<double> strat(static_cast<size_t>(n));
          double s = 0;
          for (double& x : strat) s += (x = std::pow(rng.next_double(), 3.0) + 1e-4);
          for (double& x : strat) x /= s;
          const bool a = rationality_check(g, strat, player).rational;
          const bool b = rationality_support_oracle(g, strat, player);
          agreements += a == b;
          ++total;
        }
      }
    }
    CheckResult r;
    r.name = "rationality-oracle-agreement";
    r.metric = agreements;
    r.pass = agreements == total;
    r.detail = std::to_string(agreements) + "/" + std::to_string(total) +
               " random strategies agree across all built-in games";
    out.push_back(std::move(r));
  }

  {
    // the worked fig2 cases: E never a best response, D justified by B
    const PayoffGame& g = *find_builtin("fig2_coop");
    const bool e_irr = !rationality_check(g, std::vector<double>{0, 0, 1}, 2).rational;
    const RationalityReport d = rationality_check(g, std::vector<double>{0, 1, 0}, 2);
    const bool ok = e_irr && d.rational && d.witness.size() == 2 && d.witness[1] > 0.5;
    out.push_back({"fig2-worked-example", ok, ok ? 1.0 : 0.0,
                   "pure E irrational, pure D rational with a B-leaning witness"});
  }

  {
    int ok = 0, total = 0;
    for (const PayoffGame& g : builtin_games()) {
      for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> opp(static_cast<size_t>(g.rows));
        double s = 0;
        for (double& x : opp) s += (x = rng.next_double() + 1e-6);
        for (double& x : opp) x /= s;
        const std::vector<int> br = best_response_set(g, opp, 2);
        double best = -1e18, rest = -1e18;
        for (int c = 0; c < g.cols; ++c) {
          std::vector<double> colpure(static_cast<size_t>(g.cols), 0.0);
          colpure[static_cast<size_t>(c)] = 1.0;
          const double u = exact_utility(g, opp, colpure, 2);
          if (std::find(br.begin(), br.end(), c) != br.end())
            best = std::max(best, u);
          else
            rest = std::max(rest, u);
        }
        ok += best >= rest - 1e-9;
        ++total;
      }
    }
    out.push_back({"best-response-dominance", ok == total, static_cast<double>(ok),
                   std::to_string(ok) + "/" + std::to_string(total) +
                       " best-response members dominate non-members"});
  }
  return out;
}

std::vector<CheckResult> check_dice_suite(uint64_t seed, const MagicBoxFn& box_arg) {
  const MagicBoxFn box = box_arg ? box_arg : [](Value v) { return magic_box(v); };
  std::vector<CheckResult> out;
  Rng rng = Rng::seeded(seed).fork("dice-suite");

  {
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      Tape t;
      Value tau = t.leaf(rng.next_normal() * 10.0);
      worst = std::max(worst, std::abs(box(tau).val() - 1.0));
    }
    out.push_back({"magic-box-forward", worst == 0.0, worst,
                   "forward value bit-identical to 1.0 over 200 random inputs"});
  }

  {
    // score-function identity with the stop-gradient values frozen at the
    // base point: numeric oracle is exp(tau - tau0) * A0
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<double> theta{rng.next_normal(), rng.next_normal()};
      auto tau_of = [](double a, double b) {
        const double denom = std::exp(a) + std::exp(b);
        return 1.7 * std::log(std::exp(a) / denom) + std::log(std::exp(b) / denom);
      };
      const double tau0 = tau_of(theta[0], theta[1]);
      const double a0 = 0.8 * theta[0] - 0.4 * theta[1] + 1.1;
      auto surrogate = [&](Tape& t, std::span<const Value> p) {
        Value e0 = exp(p[0]), e1 = exp(p[1]);
        Value tau = log(e0 / (e0 + e1)) * t.constant(1.7) + log(e1 / (e0 + e1));
        return exp(tau - tau0) * a0;
      };
      const FiniteDiffReport fd = finite_diff_check(surrogate, theta, 1e-5);

      Tape t;
      std::vector<Value> p{t.leaf(theta[0]), t.leaf(theta[1])};
      Value e0 = exp(p[0]), e1 = exp(p[1]);
      Value tau = log(e0 / (e0 + e1)) * t.constant(1.7) + log(e1 / (e0 + e1));
      Value advantage = stop_gradient(0.8 * p[0] - 0.4 * p[1] + 1.1);
      Value loss = box(tau) * advantage;
      auto g = t.backward(loss, p, false);
      worst = std::max(worst, fd.max_rel_err);
      for (size_t k = 0; k < 2; ++k)
        worst = std::max(worst, rel_err(g.grads[k].val(), fd.analytic[k]));
    }
    out.push_back({"dice-score-identity", worst < 1e-8, worst,
                   "box(tau)*stopgrad(A) gradient vs frozen finite differences"});
  }

  {
    // sampled manipulator gradient vs exact higher-order gradient
    const PayoffGame& game = *find_builtin("fig2_coop");
    TrainConfig cfg;
    cfg.lookahead.lookahead_n = 1;
    cfg.batch_size = 10000;
    cfg.lookahead.dice_lambda = 0.95;
    int positive = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
      AlgorithmSpec spec;
      spec.kind = AlgorithmKind::at_rpg;
      spec.seed = seed * 7919 + static_cast<uint64_t>(trial);
      ObjectiveGraph graph = build_graph(spec, cfg.lookahead.partnerplay_eps);
      PolicySet policies = make_policies(graph, spec, game, 0.8);
      const auto exact =
          manipulator_gradients(graph, game, policies, nullptr, cfg, RunMode::exact,
                                Rng::seeded(0));
      const auto sampled =
          manipulator_gradients(graph, game, policies, nullptr, cfg, RunMode::sampled,
                                Rng::seeded(spec.seed).fork("dice-trial"));
      double dot = 0.0;
      for (const auto& [id, ge] : exact) {
        const std::vector<double>& gs = sampled.at(id);
        for (size_t k = 0; k < ge.size(); ++k) dot += ge[k] * gs[k];
      }
      positive += dot > 0.0;
    }
    out.push_back({"sampled-vs-exact-gradient", positive >= 19, static_cast<double>(positive),
                   std::to_string(positive) + "/" + std::to_string(trials) +
                       " positive inner products at batch 10^4"});
  }
  return out;
}

bool all_pass(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (!r.pass) return false;
  return true;
}

void print_results(const std::vector<CheckResult>& results, std::ostream& out) {
  for (const CheckResult& r : results)
    out << (r.pass ? "[pass] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
}

}  // namespace rpg
