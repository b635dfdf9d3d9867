#pragma once
// The shaping update: N on-tape lookahead steps for base agents, a
// higher-order manipulator step through those updates, then one outer step
// for the base agents against the freshly updated manipulators.
//
// Two interchangeable paths share this control flow:
//   sampled  - surrogate losses over rollouts; manipulator gradients flow
//              through magic-box terms over the lookahead dependency set
//   exact    - expected utilities differentiated directly (no critics, no
//              magic box; expectations carry all dependencies analytically)

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpg/critic.hpp"
#include "rpg/game.hpp"
#include "rpg/graph.hpp"
#include "rpg/rng.hpp"

namespace rpg {

enum class DiceMode { loaded, raw };
enum class AdvantageNorm { pooled_per_agent, per_partner };
enum class RunMode { sampled, exact };

struct LookaheadConfig {
  int lookahead_n = 4;
  double lr_base_lookahead = 0.1;
  double lr_base = 0.01;
  double lr_manipulator = 0.01;
  double max_grad_norm_manipulator = 0.5;
  double partnerplay_eps = 0.0;
  double dice_lambda = 0.95;

  void validate() const;  // throws std::invalid_argument
};

struct TrainConfig {
  LookaheadConfig lookahead;
  double gamma = 0.95;
  double gae_lambda = 0.95;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double critic_lr = 1.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  DiceMode dice_mode = DiceMode::loaded;
  AdvantageNorm advantage_norm = AdvantageNorm::pooled_per_agent;
  int batch_size = 128;
};

struct PolicySet {
  std::map<std::string, PolicyParams> by_id;

  PolicyParams& at(const std::string& id);
  const PolicyParams& at(const std::string& id) const;
};

struct CriticSet {
  std::map<std::string, CriticParams> by_pairing;

  CriticParams& for_pairing(const std::string& key, int horizon, double lr);
};

// Gradient went non-finite; the message names the agent and its edges.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stale-tape misuse (e.g. evaluating dependencies after the lookahead graph
// was freed) surfaces as std::invalid_argument from the tape itself.

struct EdgeMetric {
  int edge_id = 0;
  std::string owner;
  double reward_mean = 0.0;
};

struct AgentMetric {
  std::string agent;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::vector<double> probs;  // row seat then col seat, post-update
};

struct StepMetrics {
  std::vector<EdgeMetric> edges;
  std::vector<AgentMetric> agents;
};

// --- loss building blocks (exposed for oracles and tests) ---

// Rollouts of one edge pairing in one seating, with advantage streams for
// whichever seats a consuming loss needs.
struct DirectionBatch {
  RolloutDirection dir;
  std::vector<Trajectory> trajs;
  AdvantageBatch adv_row;
  AdvantageBatch adv_col;
};

struct EdgeBatch {
  const Edge* edge = nullptr;
  std::vector<DirectionBatch> dirs;
};

// Weighted surrogate to maximize: sum_e w_e E[ sum_t gamma^t log pi(a_t) A_t ]
// plus entropy_coef * H(pi) per occupied seat. Gradients exist w.r.t. the
// agent's own logits only.
Value base_loss(Tape& tape, const AgentNode& agent, std::span<const EdgeBatch> batches,
                double gamma, double entropy_coef, std::span<const Value> row_logits,
                std::span<const Value> col_logits);

// Magic-box form of the same objective, used for the lookahead updates:
// sum_e w_e E[ sum_t gamma^t box(decayed joint log-prob prefix) A_t ]. Its
// first-order gradient matches base_loss, but the boxed prefixes keep the
// whole-update expression differentiable w.r.t. the training partner, which
// is how a manipulator's influence on the inner update stays on the tape.
Value dice_base_loss(Tape& tape, const AgentNode& agent, std::span<const EdgeBatch> batches,
                     double gamma, double dice_lambda, double entropy_coef,
                     std::span<const Value> row_logits, std::span<const Value> col_logits);

// DiCE loss to maximize: sum_e w_e E[ sum_t gamma^t box(deps) A_t ], where the
// dependency set joins the paired agents' lookahead log-prob blocks with the
// evaluation episode's own (decayed) action log-probs. Forward value equals
// the box-free objective. dep_blocks maps agent id -> lookahead log-prob sum.
Value manipulator_loss(Tape& tape, const AgentNode& manipulator,
                       std::span<const EdgeBatch> batches,
                       const std::map<std::string, Value>& dep_blocks, double gamma,
                       double dice_lambda, DiceMode mode);

// One full update (Algorithm lines 1-8) on sampled rollouts.
// Precondition: validate_graph(graph) is clean.
StepMetrics rpg_step(const ObjectiveGraph& graph, const PayoffGame& game, PolicySet& policies,
                     CriticSet& critics, const TrainConfig& cfg, Rng rng);

// Identical control flow with exact expected utilities.
StepMetrics exact_rpg_step(const ObjectiveGraph& graph, const PayoffGame& game,
                           PolicySet& policies, const TrainConfig& cfg);

// Runs the lookahead and returns each manipulator's unclipped gradient
// without applying any update. Policies are not modified. `critics` may be
// null (sampled mode then uses fresh zero critics). Used by the
// sampled-vs-exact consistency checks and gradient oracles.
std::map<std::string, std::vector<double>> manipulator_gradients(
    const ObjectiveGraph& graph, const PayoffGame& game, const PolicySet& policies,
    CriticSet* critics, const TrainConfig& cfg, RunMode mode, Rng rng);

}  // namespace rpg
