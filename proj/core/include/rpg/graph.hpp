#pragma once
// Objective graphs: agents are nodes, weighted evaluation edges encode every
// algorithm in the family. An agent occupies the row seat, the column seat,
// or both (population members are trained as a row/col pair).

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpg/policy.hpp"

namespace rpg {

enum class EdgePhase { lookahead_train, evaluation, partnerplay };

struct AgentNode {
  std::string id;
  Role role = Role::base;
  bool trainable = true;
  // Trainable base agents take on-tape lookahead steps unless excluded.
  bool in_lookahead = true;
  std::string manipulator;  // id of this base agent's manipulator, "" if none
  std::string row_policy;   // policy id per seat, "" when seat unoccupied
  std::string col_policy;

  bool has_row() const { return !row_policy.empty(); }
  bool has_col() const { return !col_policy.empty(); }
};

struct Edge {
  int id = 0;
  std::string owner;   // optimizing agent
  std::string first;   // evaluated pair
  std::string second;
  double weight = 1.0;
  std::string reward_of;  // agent whose reward the edge scores
  EdgePhase phase = EdgePhase::evaluation;
};

struct ObjectiveGraph {
  std::vector<AgentNode> nodes;
  std::vector<Edge> edges;
  double partnerplay_eps = 0.0;

  const AgentNode* find(std::string_view id) const;
  std::vector<const Edge*> edges_of(std::string_view owner) const;
  bool has_manipulators() const;
};

// One concrete rollout of an edge's pairing: which agent sits in which seat.
struct RolloutDirection {
  const AgentNode* row = nullptr;
  const AgentNode* col = nullptr;
};

// Seat-compatible rollout directions for a pairing. Cross pairings between
// two-seat agents yield both seatings (results are seat-averaged); a pairing
// with itself yields the single self-play seating.
std::vector<RolloutDirection> rollout_directions(const ObjectiveGraph& graph, const Edge& edge);

// Checks the structural invariants; returns human-readable findings, empty
// when the graph is well-formed.
std::vector<std::string> validate_graph(const ObjectiveGraph& graph);

}  // namespace rpg
