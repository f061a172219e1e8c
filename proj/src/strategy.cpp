#include "mpmdp/strategy.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace mpmdp {

namespace {

template <class T>
Rational total(const Dist<T>& d) {
  Rational s(0);
  for (const auto& [_, p] : d) s += p;
  return s;
}

// "key,mem" with the memory after the last comma; state ids may contain commas.
std::pair<std::string, std::int64_t> split_key(const std::string& key) {
  auto pos = key.rfind(',');
  if (pos == std::string::npos) throw ModelError("strategy key '" + key + "' is not of the form 'x,mem'");
  try {
    return {key.substr(0, pos), std::stoll(key.substr(pos + 1))};
  } catch (const std::exception&) {
    throw ModelError("strategy key '" + key + "' has a malformed memory index");
  }
}

}  // namespace

ExplicitMachine::ExplicitMachine(const Mdp& mdp, std::size_t memory_size) : mdp_(&mdp), size_(memory_size) {}

void ExplicitMachine::set_output(std::size_t state, std::int64_t m, Dist<std::size_t> d) {
  out_[{state, m}] = std::move(d);
}

void ExplicitMachine::set_update(std::size_t edge, std::int64_t m, Dist<std::int64_t> d) {
  upd_[{edge, m}] = std::move(d);
}

const Dist<std::size_t>* ExplicitMachine::find_output(std::size_t state, std::int64_t m) const {
  auto it = out_.find({state, m});
  return it == out_.end() ? nullptr : &it->second;
}

const Dist<std::int64_t>* ExplicitMachine::find_update(std::size_t edge, std::int64_t m) const {
  auto it = upd_.find({edge, m});
  return it == upd_.end() ? nullptr : &it->second;
}

Dist<Memory> ExplicitMachine::initial() const {
  Dist<Memory> d;
  for (const auto& [m, p] : alpha) d.push_back({Memory{m}, p});
  return d;
}

Dist<std::size_t> ExplicitMachine::output(std::size_t state, const Memory& m) const {
  if (auto* d = find_output(state, m.at(0))) return *d;
  throw std::logic_error("strategy has no output at (" + mdp_->states[state].id + ", " + std::to_string(m.at(0)) + ")");
}

Dist<Memory> ExplicitMachine::update(std::size_t edge, const Memory& m) const {
  auto* d = find_update(edge, m.at(0));
  if (!d) {
    if (size_ == 1) return {{Memory{0}, Rational(1)}};
    throw std::logic_error("strategy has no update at (edge " + std::to_string(mdp_->edges[edge].id) + ", " +
                           std::to_string(m.at(0)) + ")");
  }
  Dist<Memory> r;
  for (const auto& [n, p] : *d) r.push_back({Memory{n}, p});
  return r;
}

ExplicitMachine memoryless(const Mdp& mdp, const std::vector<Dist<std::size_t>>& choice) {
  ExplicitMachine m(mdp, 1);
  m.alpha = {{0, Rational(1)}};
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    if (!mdp.is_random(s) && !choice[s].empty()) m.set_output(s, 0, choice[s]);
  return m;
}

ExplicitMachine memoryless(const Mdp& mdp, const std::vector<std::size_t>& choice) {
  std::vector<Dist<std::size_t>> d(mdp.num_states());
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    if (!mdp.is_random(s) && choice[s] != SIZE_MAX) d[s] = {{choice[s], Rational(1)}};
  return memoryless(mdp, d);
}

std::vector<std::string> machine_violations(const ExplicitMachine& m) {
  std::vector<std::string> out;
  const Mdp& mdp = m.mdp();
  auto mem_ok = [&](std::int64_t k) { return k >= 0 && static_cast<std::size_t>(k) < m.memory_size(); };
  if (total(m.alpha) != 1) out.push_back("initial distribution sums to " + to_string(total(m.alpha)));
  for (const auto& [k, p] : m.alpha)
    if (!mem_ok(k) || p <= 0) out.push_back("bad initial entry for memory " + std::to_string(k));
  for (const auto& [key, d] : m.outputs()) {
    auto [s, mem] = key;
    std::string where = "(" + mdp.states[s].id + ", " + std::to_string(mem) + ")";
    if (mdp.is_random(s)) out.push_back("output defined at random state " + where);
    if (total(d) != 1) out.push_back("output at " + where + " sums to " + to_string(total(d)));
    for (const auto& [e, p] : d)
      if (e >= mdp.num_edges() || mdp.edges[e].from != s || p <= 0)
        out.push_back("output at " + where + " leaves the support of the state's edges");
  }
  for (const auto& [key, d] : m.updates()) {
    std::string where = "(edge " + std::to_string(mdp.edges[key.first].id) + ", " + std::to_string(key.second) + ")";
    if (total(d) != 1) out.push_back("update at " + where + " sums to " + to_string(total(d)));
    for (const auto& [n, p] : d)
      if (!mem_ok(n) || p <= 0) out.push_back("update at " + where + " has a bad entry");
  }
  return out;
}

namespace {

ExplicitMachine explicitize_from(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                                 std::optional<std::size_t> via_edge, std::size_t max_pairs) {
  std::map<Memory, std::int64_t> ids;
  std::vector<Memory> mems;
  auto id_of = [&](const Memory& m) {
    auto [it, fresh] = ids.emplace(m, static_cast<std::int64_t>(mems.size()));
    if (fresh) mems.push_back(m);
    return it->second;
  };
  Dist<Memory> init = f.initial();
  if (via_edge) {
    Dist<Memory> folded;
    for (const auto& [m, p] : init)
      for (const auto& [n, q] : f.update(*via_edge, m)) folded.push_back({n, p * q});
    init = std::move(folded);
  }
  std::map<std::int64_t, Rational> alpha;
  for (const auto& [m, p] : init) alpha[id_of(m)] += p;

  std::vector<std::tuple<std::size_t, std::int64_t>> pending;
  std::map<std::pair<std::size_t, std::int64_t>, bool> seen;
  for (auto start : starts)
    for (const auto& [k, _] : alpha)
      if (seen.emplace(std::make_pair(start, k), true).second) pending.emplace_back(start, k);
  struct Row {
    std::size_t s;
    std::int64_t m;
    Dist<std::size_t> out;
  };
  std::vector<Row> outs;
  std::vector<std::tuple<std::size_t, std::int64_t, Dist<std::int64_t>>> upds;
  while (!pending.empty()) {
    auto [s, k] = pending.back();
    pending.pop_back();
    if (seen.size() > max_pairs) throw std::length_error("strategy product exceeds " + std::to_string(max_pairs) + " pairs");
    Memory mem = mems[static_cast<std::size_t>(k)];
    std::vector<std::size_t> taken;
    if (mdp.is_random(s)) {
      taken = mdp.out(s);
    } else {
      auto d = f.output(s, mem);
      for (const auto& [e, p] : d) taken.push_back(e);
      outs.push_back({s, k, std::move(d)});
    }
    for (auto e : taken) {
      Dist<std::int64_t> nd;
      for (const auto& [n, p] : f.update(e, mem)) {
        auto nk = id_of(n);
        auto hit = std::find_if(nd.begin(), nd.end(), [&](const auto& x) { return x.first == nk; });
        if (hit != nd.end()) {
          hit->second += p;
          continue;
        }
        nd.push_back({nk, p});
        if (seen.emplace(std::make_pair(mdp.edges[e].to, nk), true).second) pending.emplace_back(mdp.edges[e].to, nk);
      }
      upds.emplace_back(e, k, std::move(nd));
    }
  }
  ExplicitMachine m(mdp, mems.size());
  for (const auto& [k, p] : alpha) m.alpha.push_back({k, p});
  for (auto& r : outs) m.set_output(r.s, r.m, std::move(r.out));
  for (auto& [e, k, d] : upds) m.set_update(e, k, std::move(d));
  return m;
}

}  // namespace

ExplicitMachine explicitize(const Mdp& mdp, const Strategy& f, std::size_t start, std::optional<std::size_t> via_edge,
                            std::size_t max_pairs) {
  return explicitize_from(mdp, f, {start}, via_edge, max_pairs);
}

ExplicitMachine explicitize(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                            std::size_t max_pairs) {
  return explicitize_from(mdp, f, starts, std::nullopt, max_pairs);
}

json machine_to_json(const ExplicitMachine& m) {
  const Mdp& mdp = m.mdp();
  json j;
  j["memory"] = json::array();
  for (std::size_t k = 0; k < m.memory_size(); ++k) j["memory"].push_back(k);
  j["initial"] = json::object();
  for (const auto& [k, p] : m.alpha) j["initial"][std::to_string(k)] = to_string(p);
  j["update"] = json::object();
  for (const auto& [key, d] : m.updates()) {
    json row = json::object();
    for (const auto& [n, p] : d) row[std::to_string(n)] = to_string(p);
    j["update"][std::to_string(mdp.edges[key.first].id) + "," + std::to_string(key.second)] = row;
  }
  j["output"] = json::object();
  for (const auto& [key, d] : m.outputs()) {
    json row = json::object();
    for (const auto& [e, p] : d) row[std::to_string(mdp.edges[e].id)] = to_string(p);
    j["output"][mdp.states[key.first].id + "," + std::to_string(key.second)] = row;
  }
  return j;
}

ExplicitMachine machine_from_json(const Mdp& mdp, const json& j) {
  try {
    std::size_t size = j.at("memory").size();
    if (size == 0) throw ModelError("strategy has no memory states");
    ExplicitMachine m(mdp, size);
    for (const auto& [k, p] : j.at("initial").items()) m.alpha.push_back({std::stoll(k), rational_from_json(p)});
    for (const auto& [key, row] : j.at("update").items()) {
      auto [edge, mem] = split_key(key);
      Dist<std::int64_t> d;
      for (const auto& [n, p] : row.items()) d.push_back({std::stoll(n), rational_from_json(p)});
      m.set_update(mdp.edge_index(std::stoll(edge)), mem, std::move(d));
    }
    for (const auto& [key, row] : j.at("output").items()) {
      auto [state, mem] = split_key(key);
      Dist<std::size_t> d;
      for (const auto& [e, p] : row.items()) d.push_back({mdp.edge_index(std::stoll(e)), rational_from_json(p)});
      m.set_output(mdp.state_index(state), mem, std::move(d));
    }
    auto bad = machine_violations(m);
    if (!bad.empty()) throw ModelError("invalid strategy: " + bad.front());
    return m;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed strategy JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("malformed strategy JSON: ") + e.what());
  }
}

ExplicitMachine rebind(const ExplicitMachine& m, const Mdp& to) { return machine_from_json(to, machine_to_json(m)); }

}  // namespace mpmdp
