#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpmdp/io.hpp"
#include "mpmdp/model.hpp"

namespace mpmdp {

using Memory = std::vector<std::int64_t>;
template <class T>
using Dist = std::vector<std::pair<T, Rational>>;

// Stochastic Moore machine bound to one MDP's state and edge indices. The
// memory update observes the edge just taken, which also names its source
// state; this keeps parallel edges apart.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual Dist<Memory> initial() const = 0;
  // Distribution over outgoing edge indices of a controller state.
  virtual Dist<std::size_t> output(std::size_t state, const Memory& m) const = 0;
  virtual Dist<Memory> update(std::size_t edge, const Memory& m) const = 0;
};

using StrategyPtr = std::shared_ptr<const Strategy>;

// Finite machine with memory 0..size-1 and table entries only where defined.
class ExplicitMachine : public Strategy {
 public:
  ExplicitMachine(const Mdp& mdp, std::size_t memory_size);

  std::size_t memory_size() const { return size_; }
  Dist<std::int64_t> alpha;
  void set_output(std::size_t state, std::int64_t m, Dist<std::size_t> d);
  void set_update(std::size_t edge, std::int64_t m, Dist<std::int64_t> d);
  const Dist<std::size_t>* find_output(std::size_t state, std::int64_t m) const;
  const Dist<std::int64_t>* find_update(std::size_t edge, std::int64_t m) const;
  const std::map<std::pair<std::size_t, std::int64_t>, Dist<std::size_t>>& outputs() const { return out_; }
  const std::map<std::pair<std::size_t, std::int64_t>, Dist<std::int64_t>>& updates() const { return upd_; }
  const Mdp& mdp() const { return *mdp_; }

  Dist<Memory> initial() const override;
  Dist<std::size_t> output(std::size_t state, const Memory& m) const override;
  Dist<Memory> update(std::size_t edge, const Memory& m) const override;

 private:
  const Mdp* mdp_;
  std::size_t size_;
  std::map<std::pair<std::size_t, std::int64_t>, Dist<std::size_t>> out_;
  std::map<std::pair<std::size_t, std::int64_t>, Dist<std::int64_t>> upd_;
};

// One fixed edge per controller state; memory never changes.
ExplicitMachine memoryless(const Mdp& mdp, const std::vector<std::size_t>& choice);
ExplicitMachine memoryless(const Mdp& mdp, const std::vector<Dist<std::size_t>>& choice);

// Support and normalization of every table entry; empty when sound.
std::vector<std::string> machine_violations(const ExplicitMachine& m);

// Tabulates the (state, memory) pairs reachable from start. When via_edge is
// given, the play is taken to begin with that edge (used to drop an inserted
// pre-state). Throws std::length_error beyond max_pairs.
ExplicitMachine explicitize(const Mdp& mdp, const Strategy& f, std::size_t start,
                            std::optional<std::size_t> via_edge = std::nullopt, std::size_t max_pairs = 2'000'000);
ExplicitMachine explicitize(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                            std::size_t max_pairs = 2'000'000);

json machine_to_json(const ExplicitMachine& m);
ExplicitMachine machine_from_json(const Mdp& mdp, const json& j);

// Same machine over another MDP sharing the ids it mentions.
ExplicitMachine rebind(const ExplicitMachine& m, const Mdp& to);

}  // namespace mpmdp
