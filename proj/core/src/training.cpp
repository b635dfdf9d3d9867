#include "rpg/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpg {

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

ConvergenceDetector::ConvergenceDetector(int window, double tv_threshold)
    : window_(std::max(1, window)), threshold_(tv_threshold) {
  ring_.resize(static_cast<size_t>(window_));
}

void ConvergenceDetector::observe(const std::vector<std::vector<double>>& policy_probs) {
  ring_[next_] = policy_probs;
  next_ = (next_ + 1) % ring_.size();
  count_ = std::min(count_ + 1, ring_.size());
}

double ConvergenceDetector::trailing_movement() const {
  if (count_ == 0) return 0.0;
  const size_t newest = (next_ + ring_.size() - 1) % ring_.size();
  double worst = 0.0;
  for (size_t k = 0; k < count_; ++k) {
    if (k == newest) continue;
    const auto& snap = ring_[k];
    for (size_t p = 0; p < snap.size(); ++p)
      worst = std::max(worst, total_variation(snap[p], ring_[newest][p]));
  }
  return worst;
}

bool ConvergenceDetector::converged() const {
  return count_ == ring_.size() && trailing_movement() <= threshold_;
}

namespace {

// all trainable policies, manipulators included: a live shaping cycle keeps
// the manipulator moving even while the base agents dwell near a corner
std::vector<std::vector<double>> trainable_policy_probs(const ObjectiveGraph& graph,
                                                        const PolicySet& policies) {
  std::vector<std::vector<double>> out;
  for (const AgentNode& n : graph.nodes) {
    if (!n.trainable) continue;
    if (n.has_row()) out.push_back(policy_probs(policies.at(n.row_policy)));
    if (n.has_col()) out.push_back(policy_probs(policies.at(n.col_policy)));
  }
  return out;
}

struct Stage {
  ObjectiveGraph graph;
  int64_t steps = 0;
};

}  // namespace

RunResult run_training(const AlgorithmSpec& spec, const PayoffGame& game,
                       const TrainOptions& opts, const StepCallback& on_step,
                       const CheckpointCallback& on_checkpoint) {
  spec.validate();
  opts.train.lookahead.validate();
  game.validate();

  // sequential AD trains one member per stage against the frozen earlier ones
  std::vector<Stage> stages;
  if (spec.sequential_ad) {
    const int m = spec.population;
    for (int k = 0; k < m; ++k) {
      Stage s;
      s.graph = build_sequential_ad_stage(spec, k);
      s.steps = opts.steps / m + (k == m - 1 ? opts.steps % m : 0);
      stages.push_back(std::move(s));
    }
  } else {
    stages.push_back({build_graph(spec, opts.train.lookahead.partnerplay_eps), opts.steps});
  }

  for (const Stage& s : stages) {
    const std::vector<std::string> findings = validate_graph(s.graph);
    if (!findings.empty())
      throw std::invalid_argument("objective graph is malformed: " + findings.front());
  }

  // the full-population graph defines the policy set; stage graphs reuse it
  const ObjectiveGraph full_graph =
      spec.sequential_ad ? build_graph(AlgorithmSpec{AlgorithmKind::ad, spec.population,
                                                     spec.lambda_diversity, "", spec.seed, false},
                                       opts.train.lookahead.partnerplay_eps)
                         : stages.front().graph;
  PolicySet policies = make_policies(full_graph, spec, game, opts.init_scale);
  CriticSet critics;

  RunResult result;
  result.outcome = "budget-exhausted";
  ConvergenceDetector detector(opts.convergence_window, opts.convergence_tv);
  Rng root = Rng::seeded(spec.seed);

  int64_t global_step = 0;
  bool aborted = false;
  for (size_t stage_idx = 0; stage_idx < stages.size() && !aborted; ++stage_idx) {
    const ObjectiveGraph& graph = stages[stage_idx].graph;
    const bool last_stage = stage_idx + 1 == stages.size();
    for (int64_t k = 0; k < stages[stage_idx].steps; ++k, ++global_step) {
      StepMetrics metrics;
      try {
        if (opts.mode == RunMode::sampled) {
          metrics = rpg_step(graph, game, policies, critics, opts.train,
                             root.fork("step").fork(static_cast<uint64_t>(global_step)));
        } else {
          metrics = exact_rpg_step(graph, game, policies, opts.train);
        }
      } catch (const NumericalError& err) {
        result.outcome = "diverged";
        result.diagnostic = err.what();
        aborted = true;
        break;
      }
      result.steps_run = global_step + 1;
      if (on_step) on_step(global_step, metrics);
      detector.observe(trainable_policy_probs(graph, policies));
      if (opts.checkpoint_interval > 0 && (global_step + 1) % opts.checkpoint_interval == 0 &&
          on_checkpoint)
        on_checkpoint(global_step + 1, full_graph, policies);
      if (last_stage && detector.converged()) {
        result.outcome = "converged";
        result.converged_at = global_step + 1;
        break;
      }
    }
  }

  if (result.outcome == "budget-exhausted")
    result.oscillating = detector.trailing_movement() >= std::max(5.0 * opts.convergence_tv, 0.05);
  result.graph = full_graph;
  result.policies = std::move(policies);
  if (on_checkpoint) on_checkpoint(result.steps_run, result.graph, result.policies);
  return result;
}

}  // namespace rpg
