#include "mpmdp/graph.hpp"

#include <algorithm>
#include <limits>

namespace mpmdp {

std::vector<Component> scc_decompose(const Adjacency& adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // node, next child position
  std::vector<Component> out;
  std::size_t counter = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, pos] = call.back();
      if (pos < adj[v].size()) {
        std::size_t w = adj[v][pos++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      std::size_t done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      if (low[done] != index[done]) continue;
      Component c;
      while (true) {
        std::size_t w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        c.nodes.push_back(w);
        if (w == done) break;
      }
      std::sort(c.nodes.begin(), c.nodes.end());
      if (c.nodes.size() == 1) {
        const auto& succ = adj[c.nodes[0]];
        c.trivial = std::find(succ.begin(), succ.end(), c.nodes[0]) == succ.end();
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<Component> sccs(const Mdp& mdp, const std::vector<bool>* edge_mask) {
  Adjacency adj(mdp.num_states());
  for (std::size_t e = 0; e < mdp.num_edges(); ++e)
    if (!edge_mask || (*edge_mask)[e]) adj[mdp.edges[e].from].push_back(mdp.edges[e].to);
  return scc_decompose(adj);
}

std::vector<EndComponent> mecs(const Mdp& mdp) {
  const std::size_t n = mdp.num_states(), m = mdp.num_edges();
  std::vector<bool> alive_state(n, true), alive_edge(m, true);
  auto kill_state = [&](std::size_t s) {
    alive_state[s] = false;
    for (auto e : mdp.out(s)) alive_edge[e] = false;
    for (auto e : mdp.in(s)) alive_edge[e] = false;
  };
  bool changed = true;
  std::vector<std::size_t> comp_of(n);
  while (changed) {
    changed = false;
    auto comps = sccs(mdp, &alive_edge);
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (auto s : comps[c].nodes) comp_of[s] = c;
    for (std::size_t e = 0; e < m; ++e) {
      if (!alive_edge[e]) continue;
      const Edge& ed = mdp.edges[e];
      if (comp_of[ed.from] == comp_of[ed.to]) continue;
      if (mdp.is_random(ed.from)) kill_state(ed.from);
      else alive_edge[e] = false;
      changed = true;
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (!alive_state[s]) continue;
      bool any = false, all = true;
      for (auto e : mdp.out(s)) {
        any = any || alive_edge[e];
        all = all && alive_edge[e];
      }
      if (!any || (mdp.is_random(s) && !all)) {
        kill_state(s);
        changed = true;
      }
    }
  }
  std::vector<EndComponent> result;
  for (const auto& c : sccs(mdp, &alive_edge)) {
    if (!alive_state[c.nodes[0]] || c.trivial) continue;
    EndComponent ec{c.nodes, internal_edges(mdp, c.nodes)};
    result.push_back(std::move(ec));
  }
  std::sort(result.begin(), result.end(),
            [](const EndComponent& a, const EndComponent& b) { return a.states.front() < b.states.front(); });
  return result;
}

std::vector<std::size_t> internal_edges(const Mdp& mdp, const std::vector<std::size_t>& states) {
  auto in = state_mask(mdp.num_states(), states);
  std::vector<std::size_t> es;
  for (std::size_t e = 0; e < mdp.num_edges(); ++e)
    if (in[mdp.edges[e].from] && in[mdp.edges[e].to]) es.push_back(e);
  return es;
}

std::vector<bool> state_mask(std::size_t n, const std::vector<std::size_t>& states) {
  std::vector<bool> mask(n, false);
  for (auto s : states) mask[s] = true;
  return mask;
}

std::vector<std::string> state_ids(const Mdp& mdp, const std::vector<std::size_t>& states) {
  std::vector<std::string> ids;
  for (auto s : states) ids.push_back(mdp.states[s].id);
  return ids;
}

std::optional<std::string> end_component_violation(const Mdp& mdp, const std::vector<std::size_t>& states) {
  if (states.empty()) return "empty set";
  auto in = state_mask(mdp.num_states(), states);
  for (auto s : states) {
    bool inside = false;
    for (auto e : mdp.out(s)) {
      bool stays = in[mdp.edges[e].to];
      inside = inside || stays;
      if (!stays && mdp.is_random(s))
        return "random state " + mdp.states[s].id + " has edge " + std::to_string(mdp.edges[e].id) + " leaving the set";
    }
    if (!inside) return mdp.states[s].id + " has no edge inside the set";
  }
  std::vector<bool> mask(mdp.num_edges(), false);
  for (auto e : internal_edges(mdp, states)) mask[e] = true;
  auto reach = reachable_mask(mdp, states.front(), &mask);
  for (auto s : states)
    if (!reach[s]) return "set is not strongly connected (" + mdp.states[s].id + " unreachable)";
  Adjacency rev(mdp.num_states());
  for (std::size_t e = 0; e < mdp.num_edges(); ++e)
    if (mask[e]) rev[mdp.edges[e].to].push_back(mdp.edges[e].from);
  std::vector<bool> seen(mdp.num_states(), false);
  std::vector<std::size_t> work{states.front()};
  seen[states.front()] = true;
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    for (auto w : rev[v])
      if (!seen[w]) seen[w] = true, work.push_back(w);
  }
  for (auto s : states)
    if (!seen[s]) return "set is not strongly connected (" + mdp.states[s].id + " cannot reach back)";
  return std::nullopt;
}

Mdp restrict_to(const Mdp& mdp, const std::vector<std::size_t>& states) {
  if (auto why = end_component_violation(mdp, states)) throw ModelError("not an end component: " + *why);
  return induce(mdp, states);
}

std::vector<bool> reachable_mask(const Mdp& mdp, std::size_t from, const std::vector<bool>* edge_mask) {
  std::vector<bool> seen(mdp.num_states(), false);
  std::vector<std::size_t> work{from};
  seen[from] = true;
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    for (auto e : mdp.out(v)) {
      if (edge_mask && !(*edge_mask)[e]) continue;
      auto w = mdp.edges[e].to;
      if (!seen[w]) seen[w] = true, work.push_back(w);
    }
  }
  return seen;
}

std::vector<std::size_t> reachable(const Mdp& mdp, std::size_t from) {
  auto mask = reachable_mask(mdp, from);
  std::vector<std::size_t> r;
  for (std::size_t s = 0; s < mask.size(); ++s)
    if (mask[s]) r.push_back(s);
  return r;
}

}  // namespace mpmdp
