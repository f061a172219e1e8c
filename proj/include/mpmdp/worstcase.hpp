#pragma once

#include <optional>
#include <vector>

#include "mpmdp/graph.hpp"
#include "mpmdp/model.hpp"

namespace mpmdp {

// Indices of the dimensions that take part in worst-case solving.
using Dims = std::vector<std::size_t>;

Dims active_dimensions(const std::vector<bool>& trivial);
Dims all_dimensions(std::size_t d);

// Max over circulations x >= 0 on the given edges with sum 1 of min_i sum x_e w_e[i].
// nullopt when there is no edge. The edges are expected to form one SCC.
std::optional<Rational> positive_multicycle(const Mdp& mdp, const std::vector<std::size_t>& edges, const Dims& dims);

// One edge index per random state (SIZE_MAX at controller states).
using AdversaryChoice = std::vector<std::size_t>;

struct WinningRegion {
  std::vector<bool> winning;
  std::vector<std::optional<AdversaryChoice>> certificate;  // for losing states when available

  std::vector<std::size_t> states() const;
};

struct WcOptions {
  std::size_t adversary_cap = std::size_t(1) << 20;
  bool certificates = true;  // also for the unidimensional fast path, when enumeration fits the cap
};

// States winning MP > 0 in every dimension of dims against an adversarial
// resolution of random states. Throws std::runtime_error past the cap.
WinningRegion wc_winning_region(const Mdp& mdp, const Dims& dims, const WcOptions& opt = {});

// The states winning for the controller in G[sigma] (one-player graph).
std::vector<bool> one_player_winning(const Mdp& mdp, const AdversaryChoice& sigma, const Dims& dims);

// Exact values of the unidimensional mean-payoff game (random states minimize).
std::vector<Rational> wc_value_unidim(const Mdp& mdp, std::size_t dim);

std::vector<EndComponent> mwecs(const Mdp& mdp, const Dims& dims, const WcOptions& opt = {});

struct Pruned {
  Mdp mdp;  // winning region restricted to what s0 reaches in it
  WinningRegion region;
};

// nullopt when s0 itself is losing.
std::optional<Pruned> prune(const Mdp& mdp, std::size_t s0, const Dims& dims, const WcOptions& opt = {});

}  // namespace mpmdp
