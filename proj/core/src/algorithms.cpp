#include "rpg/algorithms.hpp"

#include <stdexcept>

#include "rpg/analysis.hpp"
#include "rpg/rng.hpp"

namespace rpg {

AlgorithmKind algorithm_from_name(const std::string& name) {
  if (name == "sp") return AlgorithmKind::sp;
  if (name == "ap") return AlgorithmKind::ap;
  if (name == "at") return AlgorithmKind::at;
  if (name == "paired") return AlgorithmKind::paired;
  if (name == "ad") return AlgorithmKind::ad;
  if (name == "ap-rpg") return AlgorithmKind::ap_rpg;
  if (name == "at-rpg") return AlgorithmKind::at_rpg;
  if (name == "paired-rpg") return AlgorithmKind::paired_rpg;
  if (name == "paired-a-rpg") return AlgorithmKind::paired_a_rpg;
  if (name == "ad-rpg") return AlgorithmKind::ad_rpg;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string algorithm_name(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::sp: return "sp";
    case AlgorithmKind::ap: return "ap";
    case AlgorithmKind::at: return "at";
    case AlgorithmKind::paired: return "paired";
    case AlgorithmKind::ad: return "ad";
    case AlgorithmKind::ap_rpg: return "ap-rpg";
    case AlgorithmKind::at_rpg: return "at-rpg";
    case AlgorithmKind::paired_rpg: return "paired-rpg";
    case AlgorithmKind::paired_a_rpg: return "paired-a-rpg";
    case AlgorithmKind::ad_rpg: return "ad-rpg";
  }
  throw std::invalid_argument("unknown algorithm kind");
}

bool is_rpg_variant(AlgorithmKind kind) {
  return kind == AlgorithmKind::ap_rpg || kind == AlgorithmKind::at_rpg ||
         kind == AlgorithmKind::paired_rpg || kind == AlgorithmKind::paired_a_rpg ||
         kind == AlgorithmKind::ad_rpg;
}

bool needs_victim_checkpoint(AlgorithmKind kind) {
  return kind == AlgorithmKind::ap || kind == AlgorithmKind::ap_rpg ||
         kind == AlgorithmKind::paired_a_rpg;
}

bool is_ad_family(AlgorithmKind kind) {
  return kind == AlgorithmKind::ad || kind == AlgorithmKind::ad_rpg;
}

void AlgorithmSpec::validate() const {
  if (needs_victim_checkpoint(kind) && victim_checkpoint.empty())
    throw std::invalid_argument("algorithm '" + algorithm_name(kind) +
                                "' requires a victim checkpoint");
  if (is_ad_family(kind) && population < 2)
    throw std::invalid_argument("diversity algorithms require a population of at least 2");
  if (lambda_diversity < 0.0)
    throw std::invalid_argument("diversity lambda must be non-negative");
  if (sequential_ad && kind != AlgorithmKind::ad)
    throw std::invalid_argument("sequential staging applies to the AD baseline only");
}

namespace {

struct GraphBuilder {
  ObjectiveGraph g;
  int next_edge = 0;

  AgentNode& node(const std::string& id, Role role, bool trainable, bool row, bool col) {
    AgentNode n;
    n.id = id;
    n.role = role;
    n.trainable = trainable;
    n.in_lookahead = trainable && role == Role::base;
    if (row) n.row_policy = id + ".row";
    if (col) n.col_policy = id + ".col";
    g.nodes.push_back(std::move(n));
    return g.nodes.back();
  }

  void edge(const std::string& owner, const std::string& a, const std::string& b, double w,
            const std::string& reward_of, EdgePhase phase) {
    g.edges.push_back(Edge{next_edge++, owner, a, b, w, reward_of, phase});
  }
};

void attach_manipulator(GraphBuilder& b, const std::string& base_id, double eps,
                        const std::vector<std::string>& partners) {
  // the base agent trains against its manipulator, plus eps-weighted
  // partner-play against the base agents it is evaluated against
  const std::string manip = base_id + ".manip";
  for (AgentNode& n : b.g.nodes)
    if (n.id == base_id) n.manipulator = manip;
  b.edge(base_id, base_id, manip, 1.0 - eps, base_id, EdgePhase::lookahead_train);
  for (const std::string& p : partners)
    b.edge(base_id, p, base_id, eps / static_cast<double>(partners.size()), base_id,
           EdgePhase::partnerplay);
}

}  // namespace

ObjectiveGraph build_graph(const AlgorithmSpec& spec, double partnerplay_eps) {
  spec.validate();
  GraphBuilder b;
  b.g.partnerplay_eps = partnerplay_eps;
  const double eps = partnerplay_eps;
  const int m = spec.population;
  const double cross_w =
      spec.lambda_diversity / static_cast<double>(std::max(1, m - 1));

  switch (spec.kind) {
    case AlgorithmKind::sp: {
      for (int i = 0; i < std::max(1, m); ++i) {
        const std::string id = "member" + std::to_string(i);
        b.node(id, Role::base, true, true, true);
        b.edge(id, id, id, 1.0, id, EdgePhase::evaluation);
      }
      break;
    }
    case AlgorithmKind::ap: {
      b.node("victim", Role::base, false, true, false);
      b.node("adversary", Role::base, true, false, true);
      b.edge("adversary", "victim", "adversary", -1.0, "victim", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::at: {
      b.node("victim", Role::base, true, true, false);
      b.node("adversary", Role::base, true, false, true);
      b.edge("adversary", "victim", "adversary", -1.0, "victim", EdgePhase::evaluation);
      b.edge("victim", "victim", "adversary", 1.0, "victim", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::paired: {
      b.node("protagonist", Role::base, true, true, false);
      b.node("antagonist", Role::base, true, true, false);
      b.node("adversary", Role::base, true, false, true);
      b.edge("adversary", "antagonist", "adversary", 1.0, "antagonist", EdgePhase::evaluation);
      b.edge("adversary", "protagonist", "adversary", -1.0, "protagonist",
             EdgePhase::evaluation);
      b.edge("protagonist", "protagonist", "adversary", 1.0, "protagonist",
             EdgePhase::evaluation);
      b.edge("antagonist", "antagonist", "adversary", 1.0, "antagonist", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::ad: {
      for (int i = 0; i < m; ++i)
        b.node("member" + std::to_string(i), Role::base, true, true, true);
      for (int i = 0; i < m; ++i) {
        const std::string me = "member" + std::to_string(i);
        b.edge(me, me, me, 1.0, me, EdgePhase::evaluation);
        for (int j = 0; j < m; ++j) {
          if (j == i) continue;
          b.edge(me, me, "member" + std::to_string(j), -cross_w, me, EdgePhase::evaluation);
        }
      }
      break;
    }
    case AlgorithmKind::ap_rpg: {
      b.node("victim", Role::base, false, true, false);
      b.node("adversary", Role::base, true, false, true);
      b.node("adversary.manip", Role::manipulator, true, true, false);
      attach_manipulator(b, "adversary", eps, {"victim"});
      b.edge("adversary.manip", "victim", "adversary", -1.0, "victim", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::at_rpg: {
      b.node("victim", Role::base, true, true, false);
      b.node("adversary", Role::base, true, false, true);
      b.node("adversary.manip", Role::manipulator, true, true, false);
      attach_manipulator(b, "adversary", eps, {"victim"});
      b.edge("adversary.manip", "victim", "adversary", -1.0, "victim", EdgePhase::evaluation);
      b.edge("victim", "victim", "adversary", 1.0, "victim", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::paired_rpg:
    case AlgorithmKind::paired_a_rpg: {
      const bool attack = spec.kind == AlgorithmKind::paired_a_rpg;
      // protagonist and antagonist update at the outer step only
      AgentNode& protagonist = b.node("protagonist", Role::base, !attack, true, false);
      protagonist.in_lookahead = false;
      AgentNode& antagonist = b.node("antagonist", Role::base, true, true, false);
      antagonist.in_lookahead = false;
      b.node("adversary", Role::base, true, false, true);
      b.node("adversary.manip", Role::manipulator, true, true, false);
      attach_manipulator(b, "adversary", eps, {"protagonist", "antagonist"});
      b.edge("adversary.manip", "antagonist", "adversary", 1.0, "antagonist",
             EdgePhase::evaluation);
      b.edge("adversary.manip", "protagonist", "adversary", -1.0, "protagonist",
             EdgePhase::evaluation);
      if (!attack)
        b.edge("protagonist", "protagonist", "adversary", 1.0, "protagonist",
               EdgePhase::evaluation);
      b.edge("antagonist", "antagonist", "adversary", 1.0, "antagonist", EdgePhase::evaluation);
      break;
    }
    case AlgorithmKind::ad_rpg: {
      for (int i = 0; i < m; ++i)
        b.node("member" + std::to_string(i), Role::base, true, true, true);
      for (int i = 0; i < m; ++i)
        b.node("member" + std::to_string(i) + ".manip", Role::manipulator, true, true, true);
      for (int i = 0; i < m; ++i) {
        const std::string me = "member" + std::to_string(i);
        std::vector<std::string> partners;
        for (int j = 0; j < m; ++j)
          if (j != i) partners.push_back("member" + std::to_string(j));
        attach_manipulator(b, me, eps, partners);
        b.edge(me + ".manip", me, me, 1.0, me, EdgePhase::evaluation);
        for (const std::string& other : partners)
          b.edge(me + ".manip", me, other, -cross_w, me, EdgePhase::evaluation);
      }
      break;
    }
  }
  return b.g;
}

ObjectiveGraph build_sequential_ad_stage(const AlgorithmSpec& spec, int stage) {
  if (spec.kind != AlgorithmKind::ad)
    throw std::invalid_argument("sequential staging applies to the AD baseline only");
  if (stage < 0 || stage >= spec.population)
    throw std::invalid_argument("sequential stage out of range");
  GraphBuilder b;
  const double cross_w =
      spec.lambda_diversity / static_cast<double>(std::max(1, spec.population - 1));
  for (int i = 0; i <= stage; ++i)
    b.node("member" + std::to_string(i), Role::base, i == stage, true, true);
  const std::string me = "member" + std::to_string(stage);
  b.edge(me, me, me, 1.0, me, EdgePhase::evaluation);
  for (int j = 0; j < stage; ++j)
    b.edge(me, me, "member" + std::to_string(j), -cross_w, me, EdgePhase::evaluation);
  return b.g;
}

PolicySet make_policies(const ObjectiveGraph& graph, const AlgorithmSpec& spec,
                        const PayoffGame& game, double init_scale) {
  PolicySet out;
  PolicyCheckpoint victim;
  bool have_victim = false;
  if (!spec.victim_checkpoint.empty()) {
    victim = load_checkpoint(spec.victim_checkpoint);
    have_victim = true;
  }
  Rng root = Rng::seeded(spec.seed).fork("policy-init");
  for (const AgentNode& n : graph.nodes) {
    for (Seat seat : {Seat::row, Seat::col}) {
      const std::string& pid = seat == Seat::row ? n.row_policy : n.col_policy;
      if (pid.empty()) continue;
      PolicyParams p;
      p.id = pid;
      p.role = n.role;
      p.seat = seat;
      p.trainable = n.trainable;
      const int dim = seat == Seat::row ? game.rows : game.cols;
      if (!n.trainable && have_victim) {
        const std::vector<double>* logits = victim.seat_logits(seat);
        if (logits == nullptr)
          throw std::invalid_argument("victim checkpoint '" + spec.victim_checkpoint +
                                      "' has no " +
                                      std::string(seat == Seat::row ? "row" : "col") +
                                      " seat for agent '" + n.id + "'");
        if (static_cast<int>(logits->size()) != dim)
          throw std::invalid_argument("victim checkpoint shape mismatch for game " + game.name);
        p.logits = *logits;
      } else {
        Rng stream = root.fork(pid);
        p.logits.resize(static_cast<size_t>(dim));
        for (double& x : p.logits) x = init_scale * stream.next_normal();
      }
      out.by_id.emplace(pid, std::move(p));
    }
  }
  return out;
}

double ad_objective_value(std::span<const StrategyPair> population, const PayoffGame& game,
                          double lambda) {
  if (!game.common_payoff())
    throw std::invalid_argument(
        "ad_objective_value: diversity objective applies to cooperative games only");
  const int m = static_cast<int>(population.size());
  if (m < 1) throw std::invalid_argument("ad_objective_value: empty population");
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    total += exact_utility(game, population[i].first, population[i].second, 1);
    if (m == 1) continue;
    double cross = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const double ij = exact_utility(game, population[i].first, population[j].second, 1);
      const double ji = exact_utility(game, population[j].first, population[i].second, 1);
      cross += 0.5 * (ij + ji);
    }
    total -= lambda / static_cast<double>(m - 1) * cross;
  }
  return total;
}

}  // namespace rpg
