#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpmdp/rational.hpp"

namespace mpmdp {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Owner { Controller, Random };

using Weight = std::vector<std::int64_t>;

struct State {
  std::string id;
  Owner owner = Owner::Controller;
};

struct Edge {
  std::int64_t id = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  Weight weight;
  Rational prob;  // meaningful only when the source is random
};

// States and edges are addressed by position; ids are kept for I/O and for
// mapping between an MDP and its sub-MDPs. Call finalize() after edits.
class Mdp {
 public:
  std::size_t dimension = 0;
  std::vector<State> states;
  std::vector<Edge> edges;
  std::optional<std::size_t> initial;

  void finalize();

  std::size_t add_state(std::string id, Owner owner);
  std::size_t add_edge(std::int64_t id, std::size_t from, std::size_t to, Weight w, Rational prob = Rational(0));

  std::size_t num_states() const { return states.size(); }
  std::size_t num_edges() const { return edges.size(); }
  bool is_random(std::size_t s) const { return states[s].owner == Owner::Random; }
  const std::vector<std::size_t>& out(std::size_t s) const { return out_[s]; }
  const std::vector<std::size_t>& in(std::size_t s) const { return in_[s]; }

  std::optional<std::size_t> find_state(const std::string& id) const;
  std::optional<std::size_t> find_edge(std::int64_t id) const;
  std::size_t state_index(const std::string& id) const;  // throws ModelError
  std::size_t edge_index(std::int64_t id) const;         // throws ModelError

  std::int64_t max_abs_weight() const;
  Integer max_prob_denominator() const;

 private:
  std::vector<std::vector<std::size_t>> out_, in_;
  std::unordered_map<std::string, std::size_t> state_by_id_;
  std::unordered_map<std::int64_t, std::size_t> edge_by_id_;
};

// Every violated model constraint, empty when valid.
std::vector<std::string> validate(const Mdp& mdp);
void require_valid(const Mdp& mdp);  // throws ModelError with the joined report

enum class Mode { Wc, Exp, Bas, BwcFin, BwcInf };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct ThresholdQuery {
  Mode mode = Mode::Wc;
  std::string from;
  std::vector<Rational> mu;
  std::vector<Rational> nu;
};

void require_valid(const Mdp& mdp, const ThresholdQuery& q);

// Per-dimension affine map applied by normalize: w' = w*scale - shift.
struct Normalization {
  std::vector<Integer> scale;
  std::vector<Integer> shift;
};

struct Normalized {
  Mdp mdp;
  ThresholdQuery query;
  Normalization map;
};

// Shifts mu to zero and clamps nu at zero. Mode exp leaves everything as is,
// since mu plays no role there and the clamp would change the answer.
Normalized normalize(const Mdp& mdp, const ThresholdQuery& q);

// mu[i] <= -W: no play can violate the worst-case bound in that dimension.
std::vector<bool> detect_trivial(const std::vector<Rational>& mu, std::int64_t W);

Mdp fixture(const std::string& name);
std::vector<std::string> fixture_names();

// Sub-MDP induced by a state set; keeps edges with both ends inside. Throws
// when a random state loses an edge or a state loses all of its edges.
Mdp induce(const Mdp& mdp, const std::vector<std::size_t>& states);

}  // namespace mpmdp
