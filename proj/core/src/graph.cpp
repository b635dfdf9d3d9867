#include "rpg/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

const AgentNode* ObjectiveGraph::find(std::string_view id) const {
  for (const AgentNode& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::vector<const Edge*> ObjectiveGraph::edges_of(std::string_view owner) const {
  std::vector<const Edge*> out;
  for (const Edge& e : edges)
    if (e.owner == owner) out.push_back(&e);
  return out;
}

bool ObjectiveGraph::has_manipulators() const {
  for (const AgentNode& n : nodes)
    if (n.role == Role::manipulator) return true;
  return false;
}

std::vector<RolloutDirection> rollout_directions(const ObjectiveGraph& graph, const Edge& edge) {
  const AgentNode* a = graph.find(edge.first);
  const AgentNode* b = graph.find(edge.second);
  if (a == nullptr || b == nullptr)
    throw std::invalid_argument("rollout_directions: edge references unknown agent");
  std::vector<RolloutDirection> out;
  if (a == b) {
    if (a->has_row() && a->has_col()) out.push_back({a, a});
  } else {
    if (a->has_row() && b->has_col()) out.push_back({a, b});
    if (b->has_row() && a->has_col()) out.push_back({b, a});
  }
  if (out.empty())
    throw std::invalid_argument("rollout_directions: pairing (" + edge.first + ", " +
                                edge.second + ") has no seat-compatible rollout");
  return out;
}

std::vector<std::string> validate_graph(const ObjectiveGraph& graph) {
  std::vector<std::string> findings;
  auto flag = [&](std::string msg) { findings.push_back(std::move(msg)); };

  for (size_t i = 0; i < graph.nodes.size(); ++i)
    for (size_t j = i + 1; j < graph.nodes.size(); ++j)
      if (graph.nodes[i].id == graph.nodes[j].id)
        flag("duplicate agent id '" + graph.nodes[i].id + "'");

  for (const AgentNode& n : graph.nodes) {
    if (!n.has_row() && !n.has_col()) flag("agent '" + n.id + "' occupies no seat");
    if (!n.manipulator.empty()) {
      const AgentNode* m = graph.find(n.manipulator);
      if (m == nullptr)
        flag("agent '" + n.id + "' names unknown manipulator '" + n.manipulator + "'");
      else if (m->role != Role::manipulator)
        flag("agent '" + n.id + "' names non-manipulator '" + n.manipulator + "'");
    }
  }

  for (const Edge& e : graph.edges) {
    const AgentNode* owner = graph.find(e.owner);
    const AgentNode* a = graph.find(e.first);
    const AgentNode* b = graph.find(e.second);
    const std::string tag = "edge " + std::to_string(e.id) + " (owner '" + e.owner + "')";
    if (owner == nullptr || a == nullptr || b == nullptr) {
      flag(tag + " references an unknown agent");
      continue;
    }
    if (e.reward_of != e.first && e.reward_of != e.second)
      flag(tag + " scores reward of '" + e.reward_of + "', which is not in its pairing");
    if (!owner->trainable) flag("frozen agent '" + e.owner + "' has an outgoing edge");
    if (!std::isfinite(e.weight)) flag(tag + " has a non-finite weight");
    try {
      rollout_directions(graph, e);
    } catch (const std::invalid_argument& err) {
      flag(tag + ": " + err.what());
    }

    if (owner->role == Role::manipulator) {
      if (e.phase != EdgePhase::evaluation)
        flag(tag + ": manipulator edge must reference an evaluation-phase pairing");
      if (a->role != Role::base || b->role != Role::base)
        flag(tag + ": manipulator edge must pair base agents");
    } else {
      if (e.phase == EdgePhase::lookahead_train) {
        const bool pairs_own_manip =
            !owner->manipulator.empty() &&
            ((e.first == owner->id && e.second == owner->manipulator) ||
             (e.second == owner->id && e.first == owner->manipulator));
        if (!pairs_own_manip)
          flag(tag + ": lookahead-train edge must pair the agent with its own manipulator");
      }
      if (e.phase == EdgePhase::partnerplay && (a->role != Role::base || b->role != Role::base))
        flag(tag + ": partner-play edge must pair base agents");
      if (e.phase == EdgePhase::evaluation && (a->role != Role::base || b->role != Role::base))
        flag(tag + ": base evaluation edge must pair base agents");
    }
  }

  for (const AgentNode& n : graph.nodes) {
    if (n.trainable && graph.edges_of(n.id).empty())
      flag("trainable agent '" + n.id + "' has no outgoing edge");
    if (n.role != Role::base || n.manipulator.empty()) continue;
    // base agent with a manipulator: one (1-eps) lookahead-train edge and
    // partner-play edges totalling eps
    int lookahead_edges = 0;
    double lookahead_weight = 0.0, partner_weight = 0.0;
    for (const Edge* e : graph.edges_of(n.id)) {
      if (e->phase == EdgePhase::lookahead_train) {
        ++lookahead_edges;
        lookahead_weight = e->weight;
      } else if (e->phase == EdgePhase::partnerplay) {
        partner_weight += e->weight;
      }
    }
    if (lookahead_edges != 1) {
      flag("agent '" + n.id + "' has " + std::to_string(lookahead_edges) +
           " lookahead-train edges, expected exactly 1");
    } else {
      if (std::abs(lookahead_weight - (1.0 - graph.partnerplay_eps)) > 1e-12)
        flag("agent '" + n.id + "' lookahead-train weight is " +
             std::to_string(lookahead_weight) + ", expected 1-eps");
      if (std::abs(partner_weight - graph.partnerplay_eps) > 1e-12)
        flag("agent '" + n.id + "' partner-play weights total " +
             std::to_string(partner_weight) + ", expected eps");
    }
  }
  return findings;
}

}  // namespace rpg
