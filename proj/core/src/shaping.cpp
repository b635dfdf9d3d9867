#include "rpg/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpg/analysis.hpp"

namespace rpg {

void LookaheadConfig::validate() const {
  if (lookahead_n < 1) throw std::invalid_argument("lookahead must be >= 1");
  if (lr_base_lookahead < 0.0 || lr_base < 0.0 || lr_manipulator < 0.0)
    throw std::invalid_argument("learning rates must be >= 0");
  if (!(partnerplay_eps >= 0.0 && partnerplay_eps < 1.0))
    throw std::invalid_argument("partner-play epsilon must be in [0, 1)");
  if (!(dice_lambda >= 0.0 && dice_lambda <= 1.0))
    throw std::invalid_argument("dice lambda must be in [0, 1]");
  if (!(max_grad_norm_manipulator > 0.0))
    throw std::invalid_argument("manipulator max gradient norm must be positive");
}

PolicyParams& PolicySet::at(const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw std::invalid_argument("unknown policy '" + id + "'");
  return it->second;
}

const PolicyParams& PolicySet::at(const std::string& id) const {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw std::invalid_argument("unknown policy '" + id + "'");
  return it->second;
}

CriticParams& CriticSet::for_pairing(const std::string& key, int horizon, double lr) {
  auto it = by_pairing.find(key);
  if (it == by_pairing.end())
    it = by_pairing.emplace(key, make_critic(key, horizon, lr)).first;
  return it->second;
}

namespace {

Seat seat_of(const RolloutDirection& d, const std::string& agent_id) {
  if (d.row->id == agent_id) return Seat::row;
  if (d.col->id == agent_id) return Seat::col;
  throw std::invalid_argument("agent '" + agent_id + "' does not sit in this rollout");
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

const AdvantageBatch& stream_of(const DirectionBatch& db, Seat seat, const Edge& e) {
  const AdvantageBatch& b = seat == Seat::row ? db.adv_row : db.adv_col;
  if (b.advantages.size() != db.trajs.size())
    throw std::invalid_argument("advantages missing for a trajectory of edge " +
                                std::to_string(e.id));
  return b;
}

}  // namespace

Value base_loss(Tape& tape, const AgentNode& agent, std::span<const EdgeBatch> batches,
                double gamma, double entropy_coef, std::span<const Value> row_logits,
                std::span<const Value> col_logits) {
  Value loss = tape.constant(0.0);
  for (const EdgeBatch& eb : batches) {
    const Edge& e = *eb.edge;
    if (e.weight == 0.0 || eb.dirs.empty()) continue;
    Value edge_term = tape.constant(0.0);
    for (const DirectionBatch& db : eb.dirs) {
      if (db.trajs.empty())
        throw std::invalid_argument("base_loss: empty batch for edge " + std::to_string(e.id));
      Value dir_term = tape.constant(0.0);
      for (size_t ep = 0; ep < db.trajs.size(); ++ep) {
        const Trajectory& traj = db.trajs[ep];
        double disc = 1.0;
        for (size_t t = 0; t < traj.steps.size(); ++t) {
          const StepRecord& s = traj.steps[t];
          // each seat the agent occupies trains on its own reward stream,
          // unless the edge scores another agent's reward
          if (db.dir.row->id == agent.id) {
            const Seat stream =
                e.reward_of == agent.id ? Seat::row : seat_of(db.dir, e.reward_of);
            const double a = stream_of(db, stream, e).advantages[ep][t];
            if (!s.logp_row.valid())
              throw std::invalid_argument("base_loss: row log-prob missing for edge " +
                                          std::to_string(e.id));
            dir_term += (disc * a) * s.logp_row;
          }
          if (db.dir.col->id == agent.id) {
            const Seat stream =
                e.reward_of == agent.id ? Seat::col : seat_of(db.dir, e.reward_of);
            const double a = stream_of(db, stream, e).advantages[ep][t];
            if (!s.logp_col.valid())
              throw std::invalid_argument("base_loss: col log-prob missing for edge " +
                                          std::to_string(e.id));
            dir_term += (disc * a) * s.logp_col;
          }
          disc *= gamma;
        }
      }
      edge_term += dir_term / static_cast<double>(db.trajs.size());
    }
    loss += (e.weight / static_cast<double>(eb.dirs.size())) * edge_term;
  }
  if (entropy_coef != 0.0) {
    if (!row_logits.empty()) loss += entropy_coef * entropy_bonus(row_logits);
    if (!col_logits.empty()) loss += entropy_coef * entropy_bonus(col_logits);
  }
  return loss;
}

Value dice_base_loss(Tape& tape, const AgentNode& agent, std::span<const EdgeBatch> batches,
                     double gamma, double dice_lambda, double entropy_coef,
                     std::span<const Value> row_logits, std::span<const Value> col_logits) {
  Value loss = tape.constant(0.0);
  for (const EdgeBatch& eb : batches) {
    const Edge& e = *eb.edge;
    if (e.weight == 0.0 || eb.dirs.empty()) continue;
    Value edge_term = tape.constant(0.0);
    for (const DirectionBatch& db : eb.dirs) {
      if (db.trajs.empty())
        throw std::invalid_argument("dice_base_loss: empty batch for edge " +
                                    std::to_string(e.id));
      Value dir_term = tape.constant(0.0);
      for (size_t ep = 0; ep < db.trajs.size(); ++ep) {
        const Trajectory& traj = db.trajs[ep];
        Value prefix = tape.constant(0.0);
        double disc = 1.0;
        for (size_t t = 0; t < traj.steps.size(); ++t) {
          const StepRecord& s = traj.steps[t];
          if (!s.logp_row.valid() || !s.logp_col.valid())
            throw std::invalid_argument("dice_base_loss: joint log-probs missing for edge " +
                                        std::to_string(e.id));
          prefix = dice_lambda * prefix + s.logp_row + s.logp_col;
          double coeff = 0.0;
          if (db.dir.row->id == agent.id) {
            const Seat stream =
                e.reward_of == agent.id ? Seat::row : seat_of(db.dir, e.reward_of);
            coeff += stream_of(db, stream, e).advantages[ep][t];
          }
          if (db.dir.col->id == agent.id) {
            const Seat stream =
                e.reward_of == agent.id ? Seat::col : seat_of(db.dir, e.reward_of);
            coeff += stream_of(db, stream, e).advantages[ep][t];
          }
          if (coeff != 0.0) dir_term += (disc * coeff) * magic_box(prefix);
          disc *= gamma;
        }
      }
      edge_term += dir_term / static_cast<double>(db.trajs.size());
    }
    loss += (e.weight / static_cast<double>(eb.dirs.size())) * edge_term;
  }
  if (entropy_coef != 0.0) {
    if (!row_logits.empty()) loss += entropy_coef * entropy_bonus(row_logits);
    if (!col_logits.empty()) loss += entropy_coef * entropy_bonus(col_logits);
  }
  return loss;
}

Value manipulator_loss(Tape& tape, const AgentNode& manipulator,
                       std::span<const EdgeBatch> batches,
                       const std::map<std::string, Value>& dep_blocks, double gamma,
                       double dice_lambda, DiceMode mode) {
  (void)manipulator;
  Value loss = tape.constant(0.0);
  for (const EdgeBatch& eb : batches) {
    const Edge& e = *eb.edge;
    if (e.weight == 0.0 || eb.dirs.empty()) continue;

    // lookahead dependency block of the paired agents
    Value block{};
    bool has_block = false;
    auto accumulate_block = [&](const std::string& agent_id) {
      auto it = dep_blocks.find(agent_id);
      if (it == dep_blocks.end()) return;
      block = has_block ? block + it->second : it->second;
      has_block = true;
    };
    accumulate_block(e.first);
    if (e.second != e.first) accumulate_block(e.second);

    Value edge_term = tape.constant(0.0);
    for (const DirectionBatch& db : eb.dirs) {
      if (db.trajs.empty())
        throw std::invalid_argument("manipulator_loss: empty batch for edge " +
                                    std::to_string(e.id));
      const Seat reward_seat = seat_of(db.dir, e.reward_of);
      Value dir_term = tape.constant(0.0);
      for (size_t ep = 0; ep < db.trajs.size(); ++ep) {
        const Trajectory& traj = db.trajs[ep];
        Value decayed = tape.constant(0.0);
        const double decay = mode == DiceMode::loaded ? dice_lambda : 1.0;
        double disc = 1.0;
        for (size_t t = 0; t < traj.steps.size(); ++t) {
          const StepRecord& s = traj.steps[t];
          if (!s.logp_row.valid() || !s.logp_col.valid())
            throw std::invalid_argument(
                "manipulator_loss: stale dependency, evaluation log-probs missing for edge " +
                std::to_string(e.id));
          decayed = decay * decayed + s.logp_row + s.logp_col;
          Value dep = has_block ? block + decayed : decayed;
          const double coeff =
              mode == DiceMode::loaded
                  ? stream_of(db, reward_seat, e).advantages[ep][t]
                  : (reward_seat == Seat::row ? s.reward_row : s.reward_col);
          dir_term += (disc * coeff) * magic_box(dep);
          disc *= gamma;
        }
      }
      edge_term += dir_term / static_cast<double>(db.trajs.size());
    }
    loss += (e.weight / static_cast<double>(eb.dirs.size())) * edge_term;
  }
  return loss;
}

namespace {

struct PolState {
  PolicyParams* params = nullptr;
  std::vector<Value> base_logits, base_probs, base_logp;
  std::vector<Value> cur_logits, cur_probs, cur_logp;
  TapeOptimizerState look_opt;
};

std::vector<double> values_of(std::span<const Value> nodes) {
  std::vector<double> out;
  out.reserve(nodes.size());
  for (const Value& v : nodes) out.push_back(v.val());
  return out;
}

// mean over seatings and episodes of the discounted return of the scored seat
double batch_edge_reward(const Edge& e, const std::vector<DirectionBatch>& dirs, double gamma) {
  if (dirs.empty()) return std::nan("");
  double total = 0.0;
  for (const DirectionBatch& db : dirs) {
    const Seat seat = seat_of(db.dir, e.reward_of);
    double dir_sum = 0.0;
    for (const Trajectory& traj : db.trajs) {
      double disc = 1.0, ret = 0.0;
      for (const StepRecord& s : traj.steps) {
        ret += disc * (seat == Seat::row ? s.reward_row : s.reward_col);
        disc *= gamma;
      }
      dir_sum += ret;
    }
    total += dir_sum / static_cast<double>(db.trajs.size());
  }
  return total / static_cast<double>(dirs.size());
}

class StepEngine {
 public:
  StepEngine(const ObjectiveGraph& graph, const PayoffGame& game, PolicySet& policies,
             CriticSet* critics, const TrainConfig& cfg, RunMode mode, Rng rng)
      : graph_(graph),
        game_(game),
        policies_(policies),
        critics_(critics),
        cfg_(cfg),
        mode_(mode),
        rng_(rng) {}

  StepMetrics run() {
    setup();
    if (graph_.has_manipulators()) {
      lookahead_phase();
      manipulator_phase();
    }
    outer_phase();
    finalize_metrics();
    return std::move(metrics_);
  }

  // gradient introspection: no parameters are touched
  std::map<std::string, std::vector<double>> manip_grads_only() {
    setup();
    std::map<std::string, std::vector<double>> out;
    if (!graph_.has_manipulators()) return out;
    lookahead_phase();
    build_eval_batches();
    for (const AgentNode& m : graph_.nodes) {
      if (m.role != Role::manipulator || !m.trainable) continue;
      Value loss = build_manip_loss(m);
      std::vector<Value> wrt = agent_wrt_nodes(m, /*cur=*/false);
      Gradients g = tape_.backward(loss, wrt, /*create_graph=*/false);
      std::vector<double> grads = g.values();
      check_finite(grads, m);
      out.emplace(m.id, std::move(grads));
    }
    return out;
  }

 private:
  // --- setup ---------------------------------------------------------------

  void setup() {
    for (const AgentNode& n : graph_.nodes) {
      for (const std::string* pid : {&n.row_policy, &n.col_policy}) {
        if (pid->empty() || pol_.count(*pid)) continue;
        PolicyParams& p = policies_.at(*pid);
        PolState st;
        st.params = &p;
        st.base_logits = lift_logits(tape_, p.logits, p.trainable);
        st.base_logp = log_softmax<Value>(st.base_logits);
        st.base_probs.reserve(st.base_logp.size());
        for (const Value& lp : st.base_logp) st.base_probs.push_back(tape_.exp(lp));
        st.cur_logits = st.base_logits;
        st.cur_logp = st.base_logp;
        st.cur_probs = st.base_probs;
        st.look_opt.kind = cfg_.optimizer;
        if (p.trainable && n.role == Role::base)
          st.look_opt = lift_state(tape_, effective_opt_state(p), p.logits.size());
        pol_.emplace(*pid, std::move(st));
      }
    }
  }

  OptimizerState effective_opt_state(PolicyParams& p) const {
    if (p.opt.kind != cfg_.optimizer) {
      p.opt = OptimizerState{};
      p.opt.kind = cfg_.optimizer;
    }
    p.opt.ensure_size(p.logits.size());
    return p.opt;
  }

  std::vector<const AgentNode*> lookahead_agents() const {
    std::vector<const AgentNode*> out;
    for (const AgentNode& n : graph_.nodes)
      if (n.role == Role::base && n.trainable && n.in_lookahead) out.push_back(&n);
    return out;
  }

  std::vector<const AgentNode*> trainable_bases() const {
    std::vector<const AgentNode*> out;
    for (const AgentNode& n : graph_.nodes)
      if (n.role == Role::base && n.trainable) out.push_back(&n);
    return out;
  }

  std::vector<const std::string*> agent_policy_ids(const AgentNode& agent) const {
    std::vector<const std::string*> out;
    if (agent.has_row()) out.push_back(&agent.row_policy);
    if (agent.has_col() && agent.col_policy != agent.row_policy)
      out.push_back(&agent.col_policy);
    return out;
  }

  std::vector<Value> agent_wrt_nodes(const AgentNode& agent, bool cur) {
    std::vector<Value> out;
    for (const std::string* pid : agent_policy_ids(agent)) {
      PolState& st = pol_.at(*pid);
      const std::vector<Value>& src = cur ? st.cur_logits : st.base_logits;
      out.insert(out.end(), src.begin(), src.end());
    }
    return out;
  }

  void check_finite(std::span<const double> grads, const AgentNode& agent) const {
    for (double g : grads)
      if (!std::isfinite(g)) {
        std::ostringstream msg;
        msg << "non-finite gradient for agent '" << agent.id << "' (edges";
        for (const Edge* e : graph_.edges_of(agent.id)) msg << " " << e->id;
        msg << ")";
        throw NumericalError(msg.str());
      }
  }

  // --- rollouts (sampled mode) ----------------------------------------------

  SeatPolicy seat_policy(const std::string& policy_id, bool use_cur, bool capture) {
    PolState& st = pol_.at(policy_id);
    SeatPolicy sp;
    if (use_cur) {
      sp.probs = values_of(st.cur_probs);
      if (capture) sp.logp = st.cur_logp;
      return sp;
    }
    if (st.params->role == Role::manipulator) {
      // outer step: manipulators were already updated, use fresh values
      sp.probs = policy_probs(*st.params);
      return sp;
    }
    sp.probs = values_of(st.base_probs);
    if (capture) sp.logp = st.base_logp;
    return sp;
  }

  Phase phase_of(const Edge& e) const {
    switch (e.phase) {
      case EdgePhase::lookahead_train:
        return Phase::lookahead;
      case EdgePhase::partnerplay:
        return Phase::partnerplay;
      case EdgePhase::evaluation:
        return Phase::evaluation;
    }
    return Phase::evaluation;
  }

  std::vector<DirectionBatch> rollout_edge(const Edge& e, bool use_cur, bool capture_both,
                                           const AgentNode* owner, Rng rng) {
    std::vector<DirectionBatch> out;
    const std::vector<RolloutDirection> dirs = rollout_directions(graph_, e);
    for (size_t di = 0; di < dirs.size(); ++di) {
      const RolloutDirection& dir = dirs[di];
      const bool cap_row = capture_both || (owner != nullptr && dir.row->id == owner->id);
      const bool cap_col = capture_both || (owner != nullptr && dir.col->id == owner->id);
      SeatPolicy row = seat_policy(dir.row->row_policy, use_cur, cap_row);
      SeatPolicy col = seat_policy(dir.col->col_policy, use_cur, cap_col);
      DirectionBatch db;
      db.dir = dir;
      db.trajs.reserve(static_cast<size_t>(cfg_.batch_size));
      Rng stream = rng.fork(di);
      for (int b = 0; b < cfg_.batch_size; ++b) {
        Trajectory t = sample_episode(game_, row, col, stream);
        t.episode_id = b;
        t.phase = phase_of(e);
        t.row_agent = dir.row->id;
        t.col_agent = dir.col->id;
        db.trajs.push_back(std::move(t));
      }
      out.push_back(std::move(db));
    }
    return out;
  }

  // Attaches GAE streams consumed by `owner`'s loss over `batches`, then
  // normalizes them pooled per agent (or per partner).
  void attach_and_normalize(const AgentNode& owner, std::vector<EdgeBatch>& batches,
                            bool for_manipulator) {
    if (mode_ == RunMode::exact) return;
    if (for_manipulator && cfg_.dice_mode == DiceMode::raw) return;
    std::vector<AdvantageBatch*> pooled;
    std::map<std::string, std::vector<AdvantageBatch*>> per_partner;
    for (EdgeBatch& eb : batches) {
      const Edge& e = *eb.edge;
      if (e.weight == 0.0) continue;
      const std::string key = pairing_key(e.first, e.second);
      CriticParams& critic = critics_->for_pairing(key, game_.horizon, cfg_.critic_lr);
      for (DirectionBatch& db : eb.dirs) {
        bool need_row = false, need_col = false;
        auto mark = [&](Seat s) { (s == Seat::row ? need_row : need_col) = true; };
        if (for_manipulator) {
          mark(seat_of(db.dir, e.reward_of));
        } else {
          if (db.dir.row->id == owner.id)
            mark(e.reward_of == owner.id ? Seat::row : seat_of(db.dir, e.reward_of));
          if (db.dir.col->id == owner.id)
            mark(e.reward_of == owner.id ? Seat::col : seat_of(db.dir, e.reward_of));
        }
        auto fill = [&](Seat seat, AdvantageBatch& slot) {
          slot = gae_advantage_batch(db.trajs, critic, seat, cfg_.gamma, cfg_.gae_lambda);
          pooled.push_back(&slot);
          per_partner[key].push_back(&slot);
        };
        if (need_row) fill(Seat::row, db.adv_row);
        if (need_col) fill(Seat::col, db.adv_col);
      }
    }
    if (pooled.empty()) return;
    // manipulator coefficients stay critic-baselined only: recentering by a
    // batch statistic would cancel against the shared dependency terms
    if (for_manipulator) return;
    if (cfg_.advantage_norm == AdvantageNorm::pooled_per_agent) {
      normalize_advantages(pooled);
    } else {
      for (auto& [key, group] : per_partner) normalize_advantages(group);
    }
  }

  std::vector<EdgeBatch> train_batches(const AgentNode& agent, bool use_cur, bool capture_both,
                                       Rng rng) {
    std::vector<EdgeBatch> out;
    for (const Edge* e : graph_.edges_of(agent.id)) {
      if (e->weight == 0.0) continue;
      EdgeBatch eb;
      eb.edge = e;
      eb.dirs = rollout_edge(*e, use_cur, capture_both, &agent, rng.fork(e->id));
      remember_critic_batch(*e, eb.dirs);
      out.push_back(std::move(eb));
    }
    return out;
  }

  void remember_critic_batch(const Edge& e, const std::vector<DirectionBatch>& dirs) {
    if (mode_ == RunMode::exact) return;
    std::vector<Trajectory>& slot = critic_trajs_[pairing_key(e.first, e.second)];
    slot.clear();
    for (const DirectionBatch& db : dirs)
      slot.insert(slot.end(), db.trajs.begin(), db.trajs.end());
  }

  // --- exact-mode losses -----------------------------------------------------

  std::span<const Value> probs_nodes(const std::string& policy_id, bool use_cur) {
    PolState& st = pol_.at(policy_id);
    if (!use_cur && st.params->role == Role::manipulator) {
      // outer step against the freshly updated manipulator parameters
      auto it = manip_override_.find(policy_id);
      if (it == manip_override_.end()) {
        std::vector<Value> logits = lift_logits(tape_, st.params->logits, false);
        it = manip_override_.emplace(policy_id, softmax<Value>(logits)).first;
      }
      return it->second;
    }
    return use_cur ? st.cur_probs : st.base_probs;
  }

  Value exact_edge_value(const Edge& e, bool use_cur) {
    const std::vector<RolloutDirection> dirs = rollout_directions(graph_, e);
    Value sum = tape_.constant(0.0);
    for (const RolloutDirection& dir : dirs) {
      const int player = seat_of(dir, e.reward_of) == Seat::row ? 1 : 2;
      sum += exact_utility(tape_, game_, probs_nodes(dir.row->row_policy, use_cur),
                           probs_nodes(dir.col->col_policy, use_cur), player);
    }
    return sum / static_cast<double>(dirs.size());
  }

  double exact_edge_value_now(const Edge& e, bool use_cur) {
    const std::vector<RolloutDirection> dirs = rollout_directions(graph_, e);
    double sum = 0.0;
    for (const RolloutDirection& dir : dirs) {
      const int player = seat_of(dir, e.reward_of) == Seat::row ? 1 : 2;
      sum += exact_utility(game_, values_of(probs_nodes(dir.row->row_policy, use_cur)),
                           values_of(probs_nodes(dir.col->col_policy, use_cur)), player);
    }
    return sum / static_cast<double>(dirs.size());
  }

  Value exact_loss(const AgentNode& agent, bool use_cur) {
    Value loss = tape_.constant(0.0);
    for (const Edge* e : graph_.edges_of(agent.id)) {
      if (e->weight == 0.0) continue;
      loss += e->weight * exact_edge_value(*e, use_cur);
    }
    if (cfg_.entropy_coef != 0.0 && agent.role == Role::base) {
      for (const std::string* pid : agent_policy_ids(agent)) {
        PolState& st = pol_.at(*pid);
        loss += cfg_.entropy_coef * entropy_bonus(use_cur ? st.cur_logits : st.base_logits);
      }
    }
    return loss;
  }

  // --- phases ----------------------------------------------------------------

  void lookahead_phase() {
    const std::vector<const AgentNode*> agents = lookahead_agents();
    if (agents.empty()) return;
    for (int iter = 0; iter < cfg_.lookahead.lookahead_n; ++iter) {
      Rng iter_rng = rng_.fork("lookahead").fork(static_cast<uint64_t>(iter));
      struct Pending {
        const std::string* pid;
        std::vector<Value> logits;
      };
      std::vector<Pending> pending;
      for (const AgentNode* agent : agents) {
        Value loss{};
        if (mode_ == RunMode::sampled) {
          std::vector<EdgeBatch> batches =
              train_batches(*agent, /*use_cur=*/true, /*capture_both=*/true,
                            iter_rng.fork(agent->id));
          attach_and_normalize(*agent, batches, false);
          PolState* row_st = agent->has_row() ? &pol_.at(agent->row_policy) : nullptr;
          PolState* col_st = agent->has_col() ? &pol_.at(agent->col_policy) : nullptr;
          // boxed form: keeps the inner update differentiable w.r.t. partners
          loss = dice_base_loss(tape_, *agent, batches, cfg_.gamma,
                                cfg_.lookahead.dice_lambda, cfg_.entropy_coef,
                                row_st ? std::span<const Value>(row_st->cur_logits)
                                       : std::span<const Value>(),
                                col_st ? std::span<const Value>(col_st->cur_logits)
                                       : std::span<const Value>());
        } else {
          loss = exact_loss(*agent, /*use_cur=*/true);
        }
        std::vector<Value> wrt = agent_wrt_nodes(*agent, /*cur=*/true);
        Gradients g = tape_.backward(loss, wrt, /*create_graph=*/true);
        check_finite(g.values(), *agent);
        size_t off = 0;
        for (const std::string* pid : agent_policy_ids(*agent)) {
          PolState& st = pol_.at(*pid);
          const size_t n = st.cur_logits.size();
          std::span<const Value> grads(g.grads.data() + off, n);
          pending.push_back(
              {pid, optimizer_step(tape_, st.cur_logits, grads, st.look_opt,
                                   cfg_.lookahead.lr_base_lookahead)});
          off += n;
        }
      }
      for (Pending& p : pending) {
        PolState& st = pol_.at(*p.pid);
        st.cur_logits = std::move(p.logits);
        st.cur_logp = log_softmax<Value>(st.cur_logits);
        st.cur_probs.clear();
        for (const Value& lp : st.cur_logp) st.cur_probs.push_back(tape_.exp(lp));
      }
    }
  }

  // line 6: shared evaluation rollouts, one batch per pairing per step
  void build_eval_batches() {
    if (mode_ != RunMode::sampled) return;
    Rng eval_rng = rng_.fork("evaluation");
    for (const AgentNode& m : graph_.nodes) {
      if (m.role != Role::manipulator || !m.trainable) continue;
      for (const Edge* e : graph_.edges_of(m.id)) {
        if (e->weight == 0.0) continue;
        const std::string key = pairing_key(e->first, e->second);
        if (eval_batches_.count(key)) continue;
        eval_batches_[key] = rollout_edge(*e, /*use_cur=*/true, /*capture_both=*/true, nullptr,
                                          eval_rng.fork(key));
        remember_critic_batch(*e, eval_batches_[key]);
      }
    }
  }

  Value build_manip_loss(const AgentNode& m) {
    if (mode_ == RunMode::exact) return exact_loss(m, /*use_cur=*/true);
    std::vector<EdgeBatch> batches;
    for (const Edge* e : graph_.edges_of(m.id)) {
      EdgeBatch eb;
      eb.edge = e;
      if (e->weight != 0.0) eb.dirs = eval_batches_.at(pairing_key(e->first, e->second));
      batches.push_back(std::move(eb));
    }
    attach_and_normalize(m, batches, /*for_manipulator=*/true);
    return manipulator_loss(tape_, m, batches, /*dep_blocks=*/{}, cfg_.gamma,
                            cfg_.lookahead.dice_lambda, cfg_.dice_mode);
  }

  void manipulator_phase() {
    build_eval_batches();
    for (const AgentNode& m : graph_.nodes) {
      if (m.role != Role::manipulator || !m.trainable) continue;
      Value loss = build_manip_loss(m);
      std::vector<Value> wrt = agent_wrt_nodes(m, /*cur=*/false);
      Gradients g = tape_.backward(loss, wrt, /*create_graph=*/false);
      std::vector<double> grads = g.values();
      check_finite(grads, m);
      const double norm = l2_norm(grads);
      const double clip = cfg_.lookahead.max_grad_norm_manipulator;
      if (norm > clip)
        for (double& x : grads) x *= clip / norm;

      size_t off = 0;
      for (const std::string* pid : agent_policy_ids(m)) {
        PolState& st = pol_.at(*pid);
        effective_opt_state(*st.params);
        const size_t n = st.params->logits.size();
        apply_step(st.params->logits, std::span<const double>(grads.data() + off, n),
                   st.params->opt, cfg_.lookahead.lr_manipulator);
        off += n;
      }

      AgentMetric am;
      am.agent = m.id;
      am.loss = loss.val();
      am.grad_norm = norm;
      for (const std::string* pid : agent_policy_ids(m)) {
        std::vector<double> probs = policy_probs(*pol_.at(*pid).params);
        am.probs.insert(am.probs.end(), probs.begin(), probs.end());
      }
      metrics_.agents.push_back(std::move(am));

      // per-edge reward metric at evaluation time
      for (const Edge* e : graph_.edges_of(m.id)) {
        EdgeMetric em{e->id, m.id, std::nan("")};
        if (e->weight != 0.0) {
          em.reward_mean =
              mode_ == RunMode::sampled
                  ? batch_edge_reward(*e, eval_batches_.at(pairing_key(e->first, e->second)),
                                      cfg_.gamma)
                  : exact_edge_value_now(*e, /*use_cur=*/true);
        }
        edge_metrics_.push_back(em);
      }
    }
  }

  void outer_phase() {
    struct Pending {
      const AgentNode* agent;
      std::vector<double> grads;
      double loss = 0.0;
      double norm = 0.0;
      std::vector<EdgeMetric> edge_metrics;
    };
    std::vector<Pending> pending;
    Rng outer_rng = rng_.fork("outer");

    for (const AgentNode* agent : trainable_bases()) {
      Pending p;
      p.agent = agent;
      Value loss{};
      if (mode_ == RunMode::sampled) {
        std::vector<EdgeBatch> batches = train_batches(*agent, /*use_cur=*/false,
                                                       /*capture_both=*/false,
                                                       outer_rng.fork(agent->id));
        attach_and_normalize(*agent, batches, false);
        PolState* row_st = agent->has_row() ? &pol_.at(agent->row_policy) : nullptr;
        PolState* col_st = agent->has_col() ? &pol_.at(agent->col_policy) : nullptr;
        loss = base_loss(tape_, *agent, batches, cfg_.gamma, cfg_.entropy_coef,
                         row_st ? std::span<const Value>(row_st->base_logits)
                                : std::span<const Value>(),
                         col_st ? std::span<const Value>(col_st->base_logits)
                                : std::span<const Value>());
        for (const Edge* e : graph_.edges_of(agent->id)) {
          EdgeMetric em{e->id, agent->id, std::nan("")};
          for (const EdgeBatch& eb : batches)
            if (eb.edge == e) em.reward_mean = batch_edge_reward(*e, eb.dirs, cfg_.gamma);
          p.edge_metrics.push_back(em);
        }
      } else {
        loss = exact_loss(*agent, /*use_cur=*/false);
        for (const Edge* e : graph_.edges_of(agent->id)) {
          EdgeMetric em{e->id, agent->id, std::nan("")};
          if (e->weight != 0.0) em.reward_mean = exact_edge_value_now(*e, /*use_cur=*/false);
          p.edge_metrics.push_back(em);
        }
      }
      std::vector<Value> wrt = agent_wrt_nodes(*agent, /*cur=*/false);
      Gradients g = tape_.backward(loss, wrt, /*create_graph=*/false);
      p.grads = g.values();
      check_finite(p.grads, *agent);
      p.loss = loss.val();
      p.norm = l2_norm(p.grads);
      pending.push_back(std::move(p));
    }

    // simultaneous update of all base agents
    for (Pending& p : pending) {
      size_t off = 0;
      for (const std::string* pid : agent_policy_ids(*p.agent)) {
        PolState& st = pol_.at(*pid);
        effective_opt_state(*st.params);
        const size_t n = st.params->logits.size();
        apply_step(st.params->logits, std::span<const double>(p.grads.data() + off, n),
                   st.params->opt, cfg_.lookahead.lr_base);
        off += n;
      }
      AgentMetric am;
      am.agent = p.agent->id;
      am.loss = p.loss;
      am.grad_norm = p.norm;
      for (const std::string* pid : agent_policy_ids(*p.agent)) {
        std::vector<double> probs = policy_probs(*pol_.at(*pid).params);
        am.probs.insert(am.probs.end(), probs.begin(), probs.end());
      }
      metrics_.agents.push_back(std::move(am));
      for (EdgeMetric& em : p.edge_metrics) edge_metrics_.push_back(em);
    }

    // single critic update per pairing from the freshest batch
    if (mode_ == RunMode::sampled && critics_ != nullptr) {
      for (auto& [key, trajs] : critic_trajs_) {
        if (trajs.empty()) continue;
        CriticParams& critic = critics_->for_pairing(key, game_.horizon, cfg_.critic_lr);
        critic_update(critic, trajs, cfg_.gamma, cfg_.value_coef);
      }
    }
  }

  void finalize_metrics() {
    std::sort(edge_metrics_.begin(), edge_metrics_.end(),
              [](const EdgeMetric& a, const EdgeMetric& b) { return a.edge_id < b.edge_id; });
    metrics_.edges = std::move(edge_metrics_);
  }

  const ObjectiveGraph& graph_;
  const PayoffGame& game_;
  PolicySet& policies_;
  CriticSet* critics_;
  const TrainConfig& cfg_;
  RunMode mode_;
  Rng rng_;
  Tape tape_;
  std::map<std::string, PolState> pol_;
  std::map<std::string, std::vector<Trajectory>> critic_trajs_;
  std::map<std::string, std::vector<DirectionBatch>> eval_batches_;
  std::map<std::string, std::vector<Value>> manip_override_;
  std::vector<EdgeMetric> edge_metrics_;
  StepMetrics metrics_;
};

}  // namespace

StepMetrics rpg_step(const ObjectiveGraph& graph, const PayoffGame& game, PolicySet& policies,
                     CriticSet& critics, const TrainConfig& cfg, Rng rng) {
  cfg.lookahead.validate();
  StepEngine engine(graph, game, policies, &critics, cfg, RunMode::sampled, rng);
  return engine.run();
}

StepMetrics exact_rpg_step(const ObjectiveGraph& graph, const PayoffGame& game,
                           PolicySet& policies, const TrainConfig& cfg) {
  cfg.lookahead.validate();
  StepEngine engine(graph, game, policies, nullptr, cfg, RunMode::exact, Rng::seeded(0));
  return engine.run();
}

std::map<std::string, std::vector<double>> manipulator_gradients(
    const ObjectiveGraph& graph, const PayoffGame& game, const PolicySet& policies,
    CriticSet* critics, const TrainConfig& cfg, RunMode mode, Rng rng) {
  cfg.lookahead.validate();
  PolicySet scratch = policies;
  CriticSet local;
  if (mode == RunMode::sampled && critics == nullptr) critics = &local;
  StepEngine engine(graph, game, scratch, mode == RunMode::sampled ? critics : nullptr, cfg,
                    mode, rng);
  return engine.manip_grads_only();
}

}  // namespace rpg
