#pragma once
// Constructors for each algorithm's objective graph. Baselines attach the
// adversarial edges directly to the base agents (the sabotage-prone form);
// the RPG variants reroute them through a manipulator and let the base agent
// train only on its own reward against that manipulator.
//
// Seat conventions for matrix games: the victim/protagonist side is the row
// player, the adversary side is the column player, and a diversity population
// member is a (row, col) policy pair trained jointly.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rpg/graph.hpp"
#include "rpg/shaping.hpp"

namespace rpg {

enum class AlgorithmKind {
  sp,
  ap,
  at,
  paired,
  ad,
  ap_rpg,
  at_rpg,
  paired_rpg,
  paired_a_rpg,
  ad_rpg,
};

AlgorithmKind algorithm_from_name(const std::string& name);  // e.g. "at-rpg"
std::string algorithm_name(AlgorithmKind kind);
bool is_rpg_variant(AlgorithmKind kind);
bool needs_victim_checkpoint(AlgorithmKind kind);  // ap, ap-rpg, paired-a-rpg
bool is_ad_family(AlgorithmKind kind);

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::at_rpg;
  int population = 2;              // AD family population size m
  double lambda_diversity = 0.25;  // cross-play weight
  std::string victim_checkpoint;   // attack variants load the frozen victim
  uint64_t seed = 0;
  bool sequential_ad = false;  // prior-work staging for the AD baseline

  void validate() const;  // throws std::invalid_argument
};

// Node and edge structure only; partner-play edges carry eps weights.
ObjectiveGraph build_graph(const AlgorithmSpec& spec, double partnerplay_eps);

// Stage graph for the sequential AD baseline: members beyond `stage` are
// absent, earlier members are frozen.
ObjectiveGraph build_sequential_ad_stage(const AlgorithmSpec& spec, int stage);

// Seeded softmax policies for every seat in the graph. Frozen seats load
// from spec.victim_checkpoint when present.
PolicySet make_policies(const ObjectiveGraph& graph, const AlgorithmSpec& spec,
                        const PayoffGame& game, double init_scale);

// Diversity objective: sum_i [ U_i(self) - lambda/(m-1) sum_{j!=i} U_i(cross) ]
// with cross-play seat-averaged. Cooperative games only.
using StrategyPair = std::pair<std::vector<double>, std::vector<double>>;  // (row, col)
double ad_objective_value(std::span<const StrategyPair> population, const PayoffGame& game,
                          double lambda);

}  // namespace rpg
