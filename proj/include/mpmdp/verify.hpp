#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpmdp/io.hpp"
#include "mpmdp/strategy.hpp"

namespace mpmdp {

struct ChainEdge {
  std::size_t to;
  Rational prob;
  std::size_t edge;  // MDP edge index, for weights and reporting
};

// Product of an MDP with a strategy over reachable (state, memory) pairs.
struct InducedChain {
  const Mdp* mdp = nullptr;
  std::vector<std::size_t> state;
  std::vector<Memory> memory;
  std::vector<std::vector<ChainEdge>> out;
  Dist<std::size_t> initial;

  std::size_t size() const { return state.size(); }
  const Weight& weight(const ChainEdge& e) const { return mdp->edges[e.edge].weight; }
};

// via_edge: the play starts by taking that edge from a state outside the chain.
InducedChain induced_chain(const Mdp& mdp, const Strategy& f, std::size_t start,
                           std::optional<std::size_t> via_edge = std::nullopt, std::size_t max_nodes = 4'000'000);
// Uniform start over several states, each with the strategy's initial memory.
InducedChain induced_chain(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                           std::size_t max_nodes = 4'000'000);

struct Bscc {
  std::vector<std::size_t> nodes;
  Rational reach;                   // probability of ending up here
  std::vector<Rational> stationary; // aligned with nodes
  std::vector<Rational> value;      // mean payoff, almost surely, inside the BSCC
};

std::vector<Bscc> bscc_analysis(const InducedChain& chain);
std::vector<Rational> expected_mp(const InducedChain& chain);
std::vector<Rational> expected_mp(const std::vector<Bscc>& bsccs, std::size_t dimension);

// Minimum cycle mean in one dimension over all cycles of the chain graph;
// nullopt when the graph is acyclic.
std::optional<Rational> karp_min_mean(const InducedChain& chain, std::size_t dim);

// Generic weighted digraph form used by the tests.
struct WeightedGraph {
  std::size_t nodes = 0;
  struct Arc {
    std::size_t from, to;
    std::int64_t w;
  };
  std::vector<Arc> arcs;
};
std::optional<Rational> karp_min_mean(const WeightedGraph& g);

struct CycleStep {
  std::size_t node;
  std::size_t edge;  // MDP edge leaving the node along the cycle
};

struct WorstCaseReport {
  bool ok = true;
  std::optional<std::size_t> dimension;  // violated dimension
  std::vector<CycleStep> prefix;         // path from an initial node to the cycle
  std::vector<CycleStep> cycle;
  std::vector<Rational> cycle_mean;
  json to_json(const InducedChain& chain) const;
};

// Every play consistent with the strategy's support has MP > mu.
WorstCaseReport verify_worstcase(const InducedChain& chain, const std::vector<Rational>& mu);
// Every BSCC of the chain has mean payoff > mu.
bool verify_almost_sure(const std::vector<Bscc>& bsccs, const std::vector<Rational>& mu);
bool verify_almost_sure(const InducedChain& chain, const std::vector<Rational>& mu);

bool dominates(const std::vector<Rational>& a, const std::vector<Rational>& b);  // a > b componentwise

}  // namespace mpmdp
