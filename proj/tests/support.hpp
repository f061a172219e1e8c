#pragma once

// Brute-force oracles and random instance generators shared by the test binaries.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "mpmdp/lp.hpp"
#include "mpmdp/model.hpp"

namespace oracle {

using mpmdp::Mdp;
using mpmdp::Rational;

struct RandomMdpConfig {
  std::size_t min_states = 2;
  std::size_t max_states = 6;
  std::size_t max_dim = 3;
  std::size_t fixed_dim = 0;  // 0: random in [1, max_dim]
  std::int64_t weight_bound = 3;
  int max_denominator = 4;
  std::size_t max_outdegree = 3;
  double random_share = 0.35;
};

Mdp random_mdp(std::mt19937_64& rng, const RandomMdpConfig& cfg = {});

// A threshold component from a grid of halves in [-W-1, W+1], never exactly -W.
Rational random_threshold(std::mt19937_64& rng, std::int64_t W);

// Vertex enumeration over x >= 0 (and slack y in [0,1] when strict rows exist).
struct VertexResult {
  bool feasible = false;      // relaxation non-empty
  Rational best_slack;        // max y over the capped relaxation
  bool strictly_feasible() const { return feasible && best_slack > 0; }
};
VertexResult vertex_enumeration(const mpmdp::LinearSystem& sys);

mpmdp::LinearSystem random_system(std::mt19937_64& rng, std::size_t max_vars, std::size_t max_rows);

// Max-min over memoryless pure strategy pairs of the cycle mean reached from each state.
std::vector<Rational> brute_force_values(const Mdp& mdp, std::size_t dim);

// All end components by subset enumeration (as sorted state lists).
std::vector<std::vector<std::size_t>> all_end_components(const Mdp& mdp);

}  // namespace oracle

namespace oracle {

// Decision-level properties over a seeded random corpus.
struct PropertyReport {
  int instances = 0;
  int chain_violations = 0;
  int wc_violations = 0;
  int monotonicity_violations = 0;
  int normalize_violations = 0;
  int yes_counts[5] = {0, 0, 0, 0, 0};  // indexed by mpmdp::Mode
  std::vector<std::string> failures;
  int violations() const { return chain_violations + wc_violations + monotonicity_violations + normalize_violations; }
};

// Called once per instance with its query and the answer of every mode.
using PropertyVisitor = std::function<void(const Mdp&, const mpmdp::ThresholdQuery&, const std::map<mpmdp::Mode, bool>&)>;

PropertyReport decision_properties(std::uint64_t seed, int instances, const PropertyVisitor& visit = {});

}  // namespace oracle
