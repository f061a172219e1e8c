#include "mpmdp/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

namespace mpmdp {

void Mdp::finalize() {
  out_.assign(states.size(), {});
  in_.assign(states.size(), {});
  state_by_id_.clear();
  edge_by_id_.clear();
  for (std::size_t s = 0; s < states.size(); ++s) state_by_id_.emplace(states[s].id, s);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    edge_by_id_.emplace(edges[e].id, e);
    if (edges[e].from < states.size()) out_[edges[e].from].push_back(e);
    if (edges[e].to < states.size()) in_[edges[e].to].push_back(e);
  }
}

std::size_t Mdp::add_state(std::string id, Owner owner) {
  states.push_back({std::move(id), owner});
  return states.size() - 1;
}

std::size_t Mdp::add_edge(std::int64_t id, std::size_t from, std::size_t to, Weight w, Rational prob) {
  edges.push_back({id, from, to, std::move(w), std::move(prob)});
  return edges.size() - 1;
}

std::optional<std::size_t> Mdp::find_state(const std::string& id) const {
  auto it = state_by_id_.find(id);
  if (it == state_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Mdp::find_edge(std::int64_t id) const {
  auto it = edge_by_id_.find(id);
  if (it == edge_by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t Mdp::state_index(const std::string& id) const {
  auto s = find_state(id);
  if (!s) throw ModelError("unknown state '" + id + "'");
  return *s;
}

std::size_t Mdp::edge_index(std::int64_t id) const {
  auto e = find_edge(id);
  if (!e) throw ModelError("unknown edge " + std::to_string(id));
  return *e;
}

std::int64_t Mdp::max_abs_weight() const {
  std::int64_t W = 0;
  for (const auto& e : edges)
    for (auto x : e.weight) W = std::max<std::int64_t>(W, x < 0 ? -x : x);
  return W;
}

Integer Mdp::max_prob_denominator() const {
  Integer q = 1;
  for (const auto& e : edges)
    if (e.from < states.size() && is_random(e.from) && e.prob.get_den() > q) q = e.prob.get_den();
  return q;
}

std::vector<std::string> validate(const Mdp& mdp) {
  std::vector<std::string> report;
  if (mdp.dimension == 0) report.push_back("dimension must be positive");
  if (mdp.states.empty()) report.push_back("no states");
  std::set<std::string> ids;
  for (const auto& s : mdp.states)
    if (!ids.insert(s.id).second) report.push_back("duplicate state id '" + s.id + "'");
  std::set<std::int64_t> eids;
  std::vector<std::size_t> outdeg(mdp.states.size(), 0);
  std::vector<Rational> mass(mdp.states.size(), Rational(0));
  for (const auto& e : mdp.edges) {
    std::string tag = "edge " + std::to_string(e.id);
    if (!eids.insert(e.id).second) report.push_back("duplicate " + tag);
    if (e.from >= mdp.states.size() || e.to >= mdp.states.size()) {
      report.push_back(tag + " has an unknown endpoint");
      continue;
    }
    if (e.weight.size() != mdp.dimension)
      report.push_back(tag + " has weight of length " + std::to_string(e.weight.size()) + ", expected " +
                       std::to_string(mdp.dimension));
    ++outdeg[e.from];
    if (mdp.is_random(e.from)) {
      const std::string& sid = mdp.states[e.from].id;
      if (e.prob <= 0)
        report.push_back((e.prob == 0 ? "zero-probability edge at " : "negative-probability edge at ") + sid +
                         " (" + tag + ")");
      mass[e.from] += e.prob;
    }
  }
  for (std::size_t s = 0; s < mdp.states.size(); ++s) {
    if (outdeg[s] == 0) report.push_back(mdp.states[s].id + " has no successor");
    else if (mdp.is_random(s) && mass[s] != 1)
      report.push_back("probabilities at " + mdp.states[s].id + " sum to " + to_string(mass[s]) + ", not 1");
  }
  if (mdp.initial && *mdp.initial >= mdp.states.size()) report.push_back("initial state out of range");
  return report;
}

void require_valid(const Mdp& mdp) {
  auto report = validate(mdp);
  if (report.empty()) return;
  std::string msg = "invalid MDP:";
  for (const auto& r : report) msg += "\n  " + r;
  throw ModelError(msg);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Wc: return "wc";
    case Mode::Exp: return "exp";
    case Mode::Bas: return "bas";
    case Mode::BwcFin: return "bwc-fin";
    case Mode::BwcInf: return "bwc-inf";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "wc") return Mode::Wc;
  if (s == "exp") return Mode::Exp;
  if (s == "bas") return Mode::Bas;
  if (s == "bwc-fin") return Mode::BwcFin;
  if (s == "bwc-inf") return Mode::BwcInf;
  throw ModelError("unknown mode '" + s + "'");
}

void require_valid(const Mdp& mdp, const ThresholdQuery& q) {
  require_valid(mdp);
  mdp.state_index(q.from);
  if (q.mu.size() != mdp.dimension)
    throw ModelError("mu has " + std::to_string(q.mu.size()) + " components, expected " + std::to_string(mdp.dimension));
  if (q.nu.size() != mdp.dimension)
    throw ModelError("nu has " + std::to_string(q.nu.size()) + " components, expected " + std::to_string(mdp.dimension));
}

Normalized normalize(const Mdp& mdp, const ThresholdQuery& q) {
  Normalized r{mdp, q, {}};
  std::size_t d = mdp.dimension;
  r.map.scale.assign(d, Integer(1));
  r.map.shift.assign(d, Integer(0));
  if (q.mode == Mode::Exp) return r;
  for (std::size_t i = 0; i < d; ++i) {
    r.map.scale[i] = q.mu[i].get_den();
    r.map.shift[i] = q.mu[i].get_num();
  }
  for (auto& e : r.mdp.edges)
    for (std::size_t i = 0; i < d; ++i) {
      Integer v = Integer(static_cast<long>(e.weight[i])) * r.map.scale[i] - r.map.shift[i];
      e.weight[i] = to_int64(v);
    }
  for (std::size_t i = 0; i < d; ++i) {
    r.query.mu[i] = 0;
    Rational v = q.nu[i] * Rational(r.map.scale[i]) - Rational(r.map.shift[i]);
    r.query.nu[i] = v > 0 ? v : Rational(0);
  }
  r.mdp.finalize();
  return r;
}

std::vector<bool> detect_trivial(const std::vector<Rational>& mu, std::int64_t W) {
  std::vector<bool> t(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) t[i] = mu[i] <= Rational(-W);
  return t;
}

namespace {

Mdp run_ex(bool with_ut) {
  Mdp m;
  m.dimension = 2;
  auto s = m.add_state("s", Owner::Controller);
  auto t = m.add_state("t", Owner::Controller);
  auto u = m.add_state("u", Owner::Controller);
  auto v = m.add_state("v", Owner::Random);
  m.add_edge(0, s, t, {0, 0});
  m.add_edge(1, s, u, {0, 0});
  m.add_edge(2, t, t, {5, 15});
  if (with_ut) m.add_edge(3, u, t, {0, 0});
  m.add_edge(4, u, v, {0, 0});
  m.add_edge(5, v, u, {30, 80}, Rational(1, 2));
  m.add_edge(6, v, u, {30, -60}, Rational(1, 2));
  m.initial = s;
  return m;
}

Mdp task_ex() {
  Mdp m;
  m.dimension = 2;
  auto r0 = m.add_state("0", Owner::Random);
  auto r1 = m.add_state("1", Owner::Random);
  auto c00 = m.add_state("(0,0)", Owner::Controller);
  auto c01 = m.add_state("(0,1)", Owner::Controller);
  auto c10 = m.add_state("(1,0)", Owner::Controller);
  auto c11 = m.add_state("(1,1)", Owner::Controller);
  Rational half(1, 2);
  m.add_edge(0, r0, c00, {0, 0}, half);
  m.add_edge(1, r0, c01, {0, 0}, half);
  m.add_edge(2, r1, c10, {0, 0}, half);
  m.add_edge(3, r1, c11, {0, 0}, half);
  // (configuration, task) -> next configuration, weight (time, energy)
  m.add_edge(4, c00, r0, {30, 2});
  m.add_edge(5, c01, r0, {60, 4});
  m.add_edge(6, c00, r1, {10, 16});
  m.add_edge(7, c01, r1, {16, 26});
  m.add_edge(8, c10, r1, {2, 10});
  m.add_edge(9, c11, r1, {8, 20});
  m.add_edge(10, c10, r0, {34, 4});
  m.add_edge(11, c11, r0, {64, 6});
  m.initial = r0;
  return m;
}

Mdp approx_ex() {
  Mdp m;
  m.dimension = 2;
  auto s = m.add_state("s", Owner::Controller);
  auto t = m.add_state("t", Owner::Controller);
  m.add_edge(0, s, s, {0, 1});
  m.add_edge(1, s, t, {0, 0});
  m.add_edge(2, t, t, {1, 0});
  m.add_edge(3, t, s, {0, 0});
  m.initial = s;
  return m;
}

}  // namespace

std::vector<std::string> fixture_names() { return {"RUN_EX", "RUN_EX_BAS", "TASK_EX", "APPROX_EX"}; }

Mdp fixture(const std::string& name) {
  Mdp m;
  if (name == "RUN_EX") m = run_ex(true);
  else if (name == "RUN_EX_BAS") m = run_ex(false);
  else if (name == "TASK_EX") m = task_ex();
  else if (name == "APPROX_EX") m = approx_ex();
  else throw ModelError("unknown fixture '" + name + "'");
  m.finalize();
  return m;
}

Mdp induce(const Mdp& mdp, const std::vector<std::size_t>& states) {
  std::vector<long> idx(mdp.num_states(), -1);
  Mdp sub;
  sub.dimension = mdp.dimension;
  for (auto s : states) {
    if (idx[s] >= 0) continue;
    idx[s] = static_cast<long>(sub.add_state(mdp.states[s].id, mdp.states[s].owner));
  }
  for (auto s : states) {
    std::size_t kept = 0;
    for (auto e : mdp.out(s)) {
      const Edge& ed = mdp.edges[e];
      if (idx[ed.to] < 0) {
        if (mdp.is_random(s))
          throw ModelError("random state " + mdp.states[s].id + " has edge " + std::to_string(ed.id) +
                           " leaving the set");
        continue;
      }
      ++kept;
    }
    if (kept == 0) throw ModelError(mdp.states[s].id + " has no edge inside the set");
  }
  for (const auto& ed : mdp.edges)
    if (idx[ed.from] >= 0 && idx[ed.to] >= 0)
      sub.add_edge(ed.id, static_cast<std::size_t>(idx[ed.from]), static_cast<std::size_t>(idx[ed.to]), ed.weight,
                   ed.prob);
  if (mdp.initial && idx[*mdp.initial] >= 0) sub.initial = static_cast<std::size_t>(idx[*mdp.initial]);
  sub.finalize();
  return sub;
}

}  // namespace mpmdp
