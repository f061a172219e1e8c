#include "mpmdp/verify.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "mpmdp/graph.hpp"

namespace mpmdp {

namespace {

struct KeyHash {
  std::size_t operator()(const std::pair<std::size_t, Memory>& k) const {
    std::uint64_t h = k.first * 0x9E3779B97F4A7C15ULL;
    for (auto x : k.second) h = (h ^ static_cast<std::uint64_t>(x)) * 0x100000001B3ULL + (h >> 29);
    return static_cast<std::size_t>(h);
  }
};

Adjacency adjacency(const InducedChain& c) {
  Adjacency adj(c.size());
  for (std::size_t v = 0; v < c.size(); ++v)
    for (const auto& e : c.out[v]) adj[v].push_back(e.to);
  return adj;
}

// Expected visits z on a node set with entry mass m, transitions restricted
// to the set: z = m + z P. Solved by sparse state elimination.
std::vector<Rational> expected_visits(const InducedChain& c, const std::vector<std::size_t>& nodes,
                                      const std::vector<long>& local, std::vector<Rational> m) {
  const std::size_t n = nodes.size();
  std::vector<std::map<std::size_t, Rational>> out(n);
  std::vector<std::set<std::size_t>> in(n);
  for (std::size_t a = 0; a < n; ++a)
    for (const auto& e : c.out[nodes[a]]) {
      long b = local[e.to];
      if (b < 0) continue;
      out[a][static_cast<std::size_t>(b)] += e.prob;
      in[static_cast<std::size_t>(b)].insert(a);
    }
  struct Step {
    std::size_t k;
    Rational f, mk;
    std::vector<std::pair<std::size_t, Rational>> from;
  };
  std::vector<Step> steps;
  steps.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rational self(0);
    if (auto it = out[k].find(k); it != out[k].end()) {
      self = it->second;
      out[k].erase(it);
      in[k].erase(k);
    }
    if (self == 1) throw std::logic_error("closed loop inside a transient node set");
    Rational f = 1 / (1 - self);
    Step st{k, f, m[k], {}};
    for (auto i : in[k]) {
      Rational pik = out[i].at(k);
      st.from.push_back({i, pik});
      out[i].erase(k);
      for (const auto& [j, pkj] : out[k]) {
        out[i][j] += pik * pkj * f;
        in[j].insert(i);
      }
    }
    for (const auto& [j, pkj] : out[k]) {
      if (m[k] != 0) m[j] += m[k] * pkj * f;
      in[j].erase(k);
    }
    in[k].clear();
    out[k].clear();
    steps.push_back(std::move(st));
  }
  std::vector<Rational> z(n);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    Rational acc = it->mk;
    for (const auto& [i, p] : it->from) acc += z[i] * p;
    z[it->k] = acc * it->f;
  }
  return z;
}

}  // namespace

namespace {

InducedChain build_chain(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                         std::optional<std::size_t> via_edge, std::size_t max_nodes) {
  InducedChain c;
  c.mdp = &mdp;
  std::unordered_map<std::pair<std::size_t, Memory>, std::size_t, KeyHash> index;
  std::deque<std::size_t> work;
  auto node = [&](std::size_t s, const Memory& m) {
    auto [it, fresh] = index.emplace(std::make_pair(s, m), c.state.size());
    if (fresh) {
      if (c.state.size() >= max_nodes)
        throw std::length_error("induced chain exceeds " + std::to_string(max_nodes) + " nodes");
      c.state.push_back(s);
      c.memory.push_back(m);
      c.out.emplace_back();
      work.push_back(it->second);
    }
    return it->second;
  };
  Dist<Memory> init = f.initial();
  if (via_edge) {
    Dist<Memory> folded;
    for (const auto& [m, p] : init)
      for (const auto& [n, q] : f.update(*via_edge, m)) folded.push_back({n, p * q});
    init = std::move(folded);
  }
  std::map<std::size_t, Rational> alpha;
  const Rational share(1, static_cast<unsigned long>(starts.size()));
  for (auto start : starts)
    for (const auto& [m, p] : init) alpha[node(start, m)] += p * share;
  for (const auto& [v, p] : alpha) c.initial.push_back({v, p});

  while (!work.empty()) {
    std::size_t v = work.front();
    work.pop_front();
    std::size_t s = c.state[v];
    Memory mem = c.memory[v];
    Dist<std::size_t> moves;
    if (mdp.is_random(s)) {
      for (auto e : mdp.out(s)) moves.push_back({e, mdp.edges[e].prob});
    } else {
      moves = f.output(s, mem);
    }
    std::vector<ChainEdge> outs;
    for (const auto& [e, p] : moves) {
      if (p == 0) continue;
      for (const auto& [n, q] : f.update(e, mem)) {
        if (q == 0) continue;
        std::size_t to = node(mdp.edges[e].to, n);
        auto hit = std::find_if(outs.begin(), outs.end(), [&](const ChainEdge& x) { return x.to == to && x.edge == e; });
        if (hit != outs.end()) hit->prob += p * q;
        else outs.push_back({to, p * q, e});
      }
    }
    c.out[v] = std::move(outs);
  }
  return c;
}

}  // namespace

InducedChain induced_chain(const Mdp& mdp, const Strategy& f, std::size_t start, std::optional<std::size_t> via_edge,
                           std::size_t max_nodes) {
  return build_chain(mdp, f, {start}, via_edge, max_nodes);
}

InducedChain induced_chain(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                           std::size_t max_nodes) {
  if (starts.empty()) throw std::invalid_argument("induced chain needs a start state");
  return build_chain(mdp, f, starts, std::nullopt, max_nodes);
}

std::vector<Bscc> bscc_analysis(const InducedChain& c) {
  const std::size_t n = c.size();
  auto comps = scc_decompose(adjacency(c));
  std::vector<std::size_t> comp_of(n);
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (auto v : comps[k].nodes) comp_of[v] = k;
  std::vector<bool> bottom(comps.size(), true);
  for (std::size_t v = 0; v < n; ++v)
    for (const auto& e : c.out[v])
      if (comp_of[e.to] != comp_of[v]) bottom[comp_of[v]] = false;

  // Forward mass propagation in topological order (Tarjan emits sinks first).
  std::vector<Rational> mass(n);
  for (const auto& [v, p] : c.initial) mass[v] += p;
  std::vector<long> local(n, -1);
  std::vector<Bscc> result;
  for (std::size_t k = comps.size(); k-- > 0;) {
    const auto& nodes = comps[k].nodes;
    if (bottom[k]) {
      Rational reach(0);
      for (auto v : nodes) reach += mass[v];
      if (reach == 0) continue;
      Bscc b;
      b.nodes = nodes;
      b.reach = reach;
      if (nodes.size() == 1) {
        b.stationary = {Rational(1)};
      } else {
        // Visits to the other nodes between two returns to the first one.
        std::vector<std::size_t> others(nodes.begin() + 1, nodes.end());
        for (std::size_t a = 0; a < others.size(); ++a) local[others[a]] = static_cast<long>(a);
        std::vector<Rational> entry(others.size());
        for (const auto& e : c.out[nodes[0]])
          if (e.to != nodes[0]) entry[static_cast<std::size_t>(local[e.to])] += e.prob;
        auto z = expected_visits(c, others, local, std::move(entry));
        Rational sum(1);
        for (const auto& x : z) sum += x;
        b.stationary.push_back(1 / sum);
        for (const auto& x : z) b.stationary.push_back(x / sum);
        for (auto v : others) local[v] = -1;
      }
      b.value.assign(c.mdp->dimension, Rational(0));
      for (std::size_t a = 0; a < nodes.size(); ++a)
        for (const auto& e : c.out[nodes[a]])
          for (std::size_t i = 0; i < c.mdp->dimension; ++i)
            b.value[i] += b.stationary[a] * e.prob * c.weight(e)[i];
      result.push_back(std::move(b));
      continue;
    }
    if (comps[k].trivial) {
      std::size_t v = nodes[0];
      if (mass[v] != 0)
        for (const auto& e : c.out[v]) mass[e.to] += mass[v] * e.prob;
      continue;
    }
    std::vector<Rational> entry;
    bool any = false;
    for (auto v : nodes) {
      entry.push_back(mass[v]);
      any = any || mass[v] != 0;
    }
    if (!any) continue;
    for (std::size_t a = 0; a < nodes.size(); ++a) local[nodes[a]] = static_cast<long>(a);
    auto z = expected_visits(c, nodes, local, std::move(entry));
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      if (z[a] == 0) continue;
      for (const auto& e : c.out[nodes[a]])
        if (local[e.to] < 0) mass[e.to] += z[a] * e.prob;
    }
    for (auto v : nodes) local[v] = -1;
  }
  std::sort(result.begin(), result.end(), [](const Bscc& a, const Bscc& b) { return a.nodes.front() < b.nodes.front(); });
  return result;
}

std::vector<Rational> expected_mp(const std::vector<Bscc>& bsccs, std::size_t dimension) {
  std::vector<Rational> r(dimension, Rational(0));
  for (const auto& b : bsccs)
    for (std::size_t i = 0; i < dimension; ++i) r[i] += b.reach * b.value[i];
  return r;
}

std::vector<Rational> expected_mp(const InducedChain& chain) {
  return expected_mp(bscc_analysis(chain), chain.mdp->dimension);
}

std::optional<Rational> karp_min_mean(const WeightedGraph& g) {
  Adjacency adj(g.nodes);
  for (const auto& a : g.arcs) adj[a.from].push_back(a.to);
  auto comps = scc_decompose(adj);
  std::vector<std::size_t> comp_of(g.nodes);
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (auto v : comps[k].nodes) comp_of[v] = k;
  std::vector<std::vector<const WeightedGraph::Arc*>> arcs(comps.size());
  for (const auto& a : g.arcs)
    if (comp_of[a.from] == comp_of[a.to]) arcs[comp_of[a.from]].push_back(&a);
  std::optional<Rational> best;
  std::vector<long> local(g.nodes, -1);
  using I = __int128;
  const I inf = std::numeric_limits<I>::max() / 4;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].trivial) continue;
    const auto& nodes = comps[k].nodes;
    const std::size_t n = nodes.size();
    for (std::size_t a = 0; a < n; ++a) local[nodes[a]] = static_cast<long>(a);
    // D_k(v): minimum weight of a k-edge walk ending at v from anywhere.
    auto step = [&](const std::vector<I>& d, std::vector<I>& nd) {
      std::fill(nd.begin(), nd.end(), inf);
      for (auto* a : arcs[k]) {
        auto u = static_cast<std::size_t>(local[a->from]), v = static_cast<std::size_t>(local[a->to]);
        if (d[u] < inf) nd[v] = std::min(nd[v], d[u] + a->w);
      }
    };
    std::vector<I> d(n, 0), nd(n);
    for (std::size_t it = 0; it < n; ++it) {
      step(d, nd);
      d.swap(nd);
    }
    std::vector<I> dn = d;
    // max_k (D_n(v) - D_k(v)) / (n - k), kept as a fraction per node.
    std::vector<std::pair<I, I>> worst(n, {0, 0});
    std::fill(d.begin(), d.end(), 0);
    for (std::size_t kk = 0; kk < n; ++kk) {
      for (std::size_t v = 0; v < n; ++v) {
        if (dn[v] >= inf || d[v] >= inf) continue;
        I num = dn[v] - d[v], den = static_cast<I>(n - kk);
        if (worst[v].second == 0 || num * worst[v].second > worst[v].first * den) worst[v] = {num, den};
      }
      step(d, nd);
      d.swap(nd);
    }
    for (std::size_t v = 0; v < n; ++v) {
      if (worst[v].second == 0) continue;
      auto to_mpz = [](I x) {
        bool neg = x < 0;
        unsigned __int128 u = neg ? static_cast<unsigned __int128>(-x) : static_cast<unsigned __int128>(x);
        Integer z(static_cast<unsigned long>(u >> 64));
        z <<= 64;
        z += static_cast<unsigned long>(u & 0xFFFFFFFFFFFFFFFFULL);
        return neg ? Integer(-z) : z;
      };
      Rational r(to_mpz(worst[v].first), to_mpz(worst[v].second));
      r.canonicalize();
      if (!best || r < *best) best = r;
    }
    for (auto v : nodes) local[v] = -1;
  }
  return best;
}

std::optional<Rational> karp_min_mean(const InducedChain& chain, std::size_t dim) {
  WeightedGraph g;
  g.nodes = chain.size();
  for (std::size_t v = 0; v < chain.size(); ++v)
    for (const auto& e : chain.out[v]) g.arcs.push_back({v, e.to, chain.weight(e)[dim]});
  return karp_min_mean(g);
}

namespace {

// A cycle of total weight <= 0 under w*q - p, or nothing. Weights are scaled
// to (w*q - p)*(n+1) - 1 so that non-positive simple cycles become negative.
std::optional<std::vector<CycleStep>> non_positive_cycle(const InducedChain& c, std::size_t dim, const Integer& p,
                                                          const Integer& q) {
  using I = __int128;
  const std::size_t n = c.size();
  if (!p.fits_slong_p() || !q.fits_slong_p()) throw std::overflow_error("threshold too large for cycle search");
  const I P = p.get_si(), Q = q.get_si(), scale = static_cast<I>(n) + 1;
  auto weight = [&](const ChainEdge& e) { return (static_cast<I>(c.weight(e)[dim]) * Q - P) * scale - 1; };
  std::vector<I> dist(n, 0);
  std::vector<long> pred(n, -1);
  std::vector<const ChainEdge*> pred_edge(n, nullptr);
  std::vector<bool> queued(n, true);
  std::vector<std::size_t> stamp(n, 0);
  std::size_t round = 0;
  // A cycle of the predecessor graph, which always has negative weight.
  auto pred_cycle = [&]() -> std::optional<std::vector<CycleStep>> {
    ++round;
    std::vector<std::size_t> owner(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
      if (stamp[s] == round) continue;
      std::size_t x = s;
      while (true) {
        if (stamp[x] == round) {
          if (owner[x] != s) break;
          std::vector<CycleStep> cyc;
          std::size_t y = x;
          do {
            std::size_t from = static_cast<std::size_t>(pred[y]);
            cyc.push_back({from, pred_edge[y]->edge});
            y = from;
          } while (y != x);
          std::reverse(cyc.begin(), cyc.end());
          return cyc;
        }
        stamp[x] = round;
        owner[x] = s;
        if (pred[x] < 0) break;
        x = static_cast<std::size_t>(pred[x]);
      }
    }
    return std::nullopt;
  };
  std::deque<std::size_t> queue;
  for (std::size_t v = 0; v < n; ++v) queue.push_back(v);
  std::size_t relaxations = 0;
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    queued[u] = false;
    for (const auto& e : c.out[u]) {
      I nd = dist[u] + weight(e);
      if (nd >= dist[e.to]) continue;
      dist[e.to] = nd;
      pred[e.to] = static_cast<long>(u);
      pred_edge[e.to] = &e;
      if (++relaxations % n == 0)
        if (auto cyc = pred_cycle()) {
          I total = 0;
          for (const auto& st : *cyc)
            for (const auto& ce : c.out[st.node])
              if (ce.edge == st.edge) {
                total += weight(ce);
                break;
              }
          if (total >= 0) throw std::logic_error("predecessor cycle is not negative");
          return cyc;
        }
      if (!queued[e.to]) {
        queued[e.to] = true;
        queue.push_back(e.to);
      }
    }
  }
  return std::nullopt;
}

std::vector<CycleStep> path_to(const InducedChain& c, std::size_t target) {
  std::vector<long> pred(c.size(), -1);
  std::vector<std::size_t> pedge(c.size());
  std::vector<bool> seen(c.size(), false);
  std::deque<std::size_t> q;
  for (const auto& [v, _] : c.initial) {
    seen[v] = true;
    q.push_back(v);
  }
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    if (u == target) break;
    for (const auto& e : c.out[u])
      if (!seen[e.to]) {
        seen[e.to] = true;
        pred[e.to] = static_cast<long>(u);
        pedge[e.to] = e.edge;
        q.push_back(e.to);
      }
  }
  std::vector<CycleStep> path;
  for (std::size_t v = target; pred[v] >= 0; v = static_cast<std::size_t>(pred[v]))
    path.push_back({static_cast<std::size_t>(pred[v]), pedge[v]});
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

WorstCaseReport verify_worstcase(const InducedChain& chain, const std::vector<Rational>& mu) {
  WorstCaseReport rep;
  const Mdp& mdp = *chain.mdp;
  const std::int64_t W = mdp.max_abs_weight();
  for (std::size_t i = 0; i < mdp.dimension; ++i) {
    if (mu[i] < -W) continue;  // no cycle can reach below -W
    auto cyc = non_positive_cycle(chain, i, mu[i].get_num(), mu[i].get_den());
    if (!cyc) continue;
    rep.ok = false;
    rep.dimension = i;
    rep.cycle = std::move(*cyc);
    rep.prefix = path_to(chain, rep.cycle.front().node);
    rep.cycle_mean.assign(mdp.dimension, Rational(0));
    for (const auto& st : rep.cycle)
      for (std::size_t k = 0; k < mdp.dimension; ++k) rep.cycle_mean[k] += mdp.edges[st.edge].weight[k];
    for (auto& x : rep.cycle_mean) x /= static_cast<long>(rep.cycle.size());
    return rep;
  }
  return rep;
}

json WorstCaseReport::to_json(const InducedChain& chain) const {
  json j;
  j["ok"] = ok;
  if (ok) return j;
  const Mdp& mdp = *chain.mdp;
  j["dimension"] = *dimension;
  auto steps = [&](const std::vector<CycleStep>& v) {
    json a = json::array();
    for (const auto& s : v)
      a.push_back({{"state", mdp.states[chain.state[s.node]].id}, {"memory", chain.memory[s.node]},
                   {"edge", mdp.edges[s.edge].id}});
    return a;
  };
  j["prefix"] = steps(prefix);
  j["cycle"] = steps(cycle);
  j["cycle_mean"] = vector_json(cycle_mean);
  return j;
}

bool verify_almost_sure(const std::vector<Bscc>& bsccs, const std::vector<Rational>& mu) {
  for (const auto& b : bsccs)
    if (!dominates(b.value, mu)) return false;
  return true;
}

bool verify_almost_sure(const InducedChain& chain, const std::vector<Rational>& mu) {
  return verify_almost_sure(bscc_analysis(chain), mu);
}

bool dominates(const std::vector<Rational>& a, const std::vector<Rational>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] > b[i])) return false;
  return true;
}

}  // namespace mpmdp
