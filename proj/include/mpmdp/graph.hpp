#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpmdp/model.hpp"

namespace mpmdp {

using Adjacency = std::vector<std::vector<std::size_t>>;

struct Component {
  std::vector<std::size_t> nodes;  // ascending
  bool trivial = false;           // singleton without self-loop
};

// Tarjan; components come out in reverse topological order (sinks first).
std::vector<Component> scc_decompose(const Adjacency& adj);

// SCCs of the MDP graph. Edges with edge_mask[e] == false are ignored.
std::vector<Component> sccs(const Mdp& mdp, const std::vector<bool>* edge_mask = nullptr);

struct EndComponent {
  std::vector<std::size_t> states;  // ascending
  std::vector<std::size_t> edges;   // internal edges, ascending
};

std::vector<EndComponent> mecs(const Mdp& mdp);

// Reason the set fails to be an end component, or nullopt.
std::optional<std::string> end_component_violation(const Mdp& mdp, const std::vector<std::size_t>& states);

// Sub-MDP on an end component. Throws ModelError otherwise.
Mdp restrict_to(const Mdp& mdp, const std::vector<std::size_t>& states);

std::vector<bool> reachable_mask(const Mdp& mdp, std::size_t from, const std::vector<bool>* edge_mask = nullptr);
std::vector<std::size_t> reachable(const Mdp& mdp, std::size_t from);

std::vector<std::size_t> internal_edges(const Mdp& mdp, const std::vector<std::size_t>& states);
std::vector<bool> state_mask(std::size_t n, const std::vector<std::size_t>& states);
std::vector<std::string> state_ids(const Mdp& mdp, const std::vector<std::size_t>& states);

}  // namespace mpmdp
