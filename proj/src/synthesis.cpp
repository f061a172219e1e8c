#include "mpmdp/synthesis.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mpmdp {

namespace {

void add_mass(Dist<Memory>& d, Memory m, const Rational& p) {
  if (p == 0) return;
  for (auto& [n, q] : d)
    if (n == m) {
      q += p;
      return;
    }
  d.push_back({std::move(m), p});
}

// 0 on dims, below -W elsewhere so the worst-case check skips the dimension.
std::vector<Rational> wc_mu(const Mdp& mdp, const Dims& dims) {
  std::vector<Rational> mu(mdp.dimension, Rational(-(mdp.max_abs_weight() + 1)));
  for (auto i : dims) mu[i] = 0;
  return mu;
}

WorstCaseReport wc_from(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts, const Dims& dims,
                        std::size_t max_nodes = 4'000'000) {
  return verify_worstcase(induced_chain(mdp, f, starts, max_nodes), wc_mu(mdp, dims));
}

std::optional<Rational> margin_from(const Mdp& mdp, const Strategy& f, const std::vector<std::size_t>& starts,
                                    const Dims& dims) {
  auto chain = induced_chain(mdp, f, starts);
  std::optional<Rational> best;
  for (auto i : dims) {
    auto v = karp_min_mean(chain, i);
    if (v && (!best || *v < *best)) best = v;
  }
  return best;
}

std::vector<std::size_t> all_states(const Mdp& mdp) {
  std::vector<std::size_t> v(mdp.num_states());
  std::iota(v.begin(), v.end(), std::size_t(0));
  return v;
}

class GlobalUnichain : public Strategy {
 public:
  GlobalUnichain(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<LocalComponent>& locals,
                 std::int64_t A)
      : locals_(locals), comp_(mdp.num_states(), -1) {
    std::vector<Rational> shares;
    for (const auto& l : locals) shares.push_back(l.x);
    Integer b = lcm_denominators(shares);
    for (std::size_t i = 0; i < locals.size(); ++i) {
      for (auto s : locals[i].states) comp_[s] = static_cast<long>(i);
      Rational c = locals[i].x * b;
      len_.push_back(A * to_int64(c.get_num()));
      reach_.push_back(reach_strategy(mdp, ec, locals[i].states));
    }
  }

  Dist<Memory> initial() const override { return {{Memory{0, 0}, Rational(1)}}; }

  Dist<std::size_t> output(std::size_t state, const Memory& m) const override {
    auto i = static_cast<std::size_t>(m[0]);
    if (comp_[state] == static_cast<long>(i)) return locals_[i].g[state];
    auto e = reach_[i][state];
    if (e == SIZE_MAX) throw std::logic_error("unichain strategy used outside its end component");
    return {{e, Rational(1)}};
  }

  Dist<Memory> update(std::size_t edge, const Memory& m) const override {
    const auto k = static_cast<std::int64_t>(locals_.size());
    if (k == 1) return {{Memory{0, 0}, Rational(1)}};
    return {{step(edge, m), Rational(1)}};
  }

  void bind(const Mdp& mdp) { mdp_ = &mdp; }

 private:
  Memory step(std::size_t edge, const Memory& m) const {
    const auto k = static_cast<std::int64_t>(locals_.size());
    auto i = m[0], j = m[1];
    if (comp_[mdp_->edges[edge].from] != i) return {i, j};
    if (j + 1 >= len_[static_cast<std::size_t>(i)]) return {(i + 1) % k, 0};
    return {i, j + 1};
  }

  const Mdp* mdp_ = nullptr;
  std::vector<LocalComponent> locals_;
  std::vector<long> comp_;
  std::vector<std::int64_t> len_;
  std::vector<std::vector<std::size_t>> reach_;
};

// Witness of a threshold system split by component.
struct Flow {
  std::vector<Rational> assignment;
  std::vector<Rational> x;                 // per MDP edge
  std::vector<Rational> mass;              // per component
  std::vector<std::vector<Rational>> nu;   // per component, mean payoff of its frequencies
  std::vector<Rational> gap;               // achieved expectation minus nu
};

Flow read_flow(const Decision& d) {
  Flow f;
  const Mdp& mdp = d.working;
  f.assignment = d.lp->witness();
  for (auto v : d.system->x_edge) f.x.push_back(f.assignment[v]);
  f.gap.assign(mdp.dimension, Rational(0));
  for (std::size_t e = 0; e < mdp.num_edges(); ++e)
    for (std::size_t i = 0; i < mdp.dimension; ++i) f.gap[i] += f.x[e] * mdp.edges[e].weight[i];
  for (std::size_t i = 0; i < mdp.dimension; ++i) f.gap[i] -= d.normalized.query.nu[i];
  for (const auto& c : d.components) {
    Rational mass(0);
    std::vector<Rational> nu(mdp.dimension, Rational(0));
    for (auto e : c.edges) {
      mass += f.x[e];
      for (std::size_t i = 0; i < mdp.dimension; ++i) nu[i] += f.x[e] * mdp.edges[e].weight[i];
    }
    if (mass > 0)
      for (auto& v : nu) v /= mass;
    f.mass.push_back(mass);
    f.nu.push_back(std::move(nu));
  }
  return f;
}

// Per-component expectation goal: sum_U mass_U target_U stays above nu, and
// target_U is positive wherever the component rows demand it.
std::vector<Rational> component_target(const Flow& f, std::size_t k, const Dims& positive) {
  std::vector<Rational> t(f.gap.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = f.nu[k][i] - f.gap[i] / 2;
  for (auto i : positive) t[i] = std::max(t[i], Rational(f.nu[k][i] / 2));
  return t;
}

std::vector<Rational> edges_of(const Flow& f, const EndComponent& c) {
  std::vector<Rational> x(f.x.size(), Rational(0));
  for (auto e : c.edges) x[e] = f.x[e];
  return x;
}

template <class Digits, class F>
bool for_each_digits(const Digits& radix, F f) {
  std::vector<std::size_t> digit(radix.size(), 0);
  while (true) {
    if (f(digit)) return true;
    std::size_t p = 0;
    while (p < radix.size() && ++digit[p] == radix[p]) digit[p++] = 0;
    if (p == radix.size()) return false;
  }
}

// Product graph given as arcs (from, to, edge); winning when every cycle
// reachable from starts has positive mean in each dimension of dims.
bool graph_wins(const Mdp& mdp, std::size_t nodes, const std::vector<std::array<std::size_t, 3>>& arcs,
                const std::vector<std::size_t>& starts, const Dims& dims) {
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (std::size_t a = 0; a < arcs.size(); ++a) adj[arcs[a][0]].push_back(a);
  std::vector<long> idx(nodes, -1);
  std::vector<std::size_t> stack;
  std::size_t count = 0;
  for (auto s : starts)
    if (idx[s] < 0) {
      idx[s] = static_cast<long>(count++);
      stack.push_back(s);
    }
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto a : adj[u]) {
      auto v = arcs[a][1];
      if (idx[v] < 0) {
        idx[v] = static_cast<long>(count++);
        stack.push_back(v);
      }
    }
  }
  for (auto i : dims) {
    WeightedGraph g;
    g.nodes = count;
    for (const auto& a : arcs)
      if (idx[a[0]] >= 0)
        g.arcs.push_back({static_cast<std::size_t>(idx[a[0]]), static_cast<std::size_t>(idx[a[1]]),
                          mdp.edges[a[2]].weight[i]});
    auto v = karp_min_mean(g);
    if (v && *v <= 0) return false;
  }
  return true;
}

// MP > 0 in one dimension as an energy game on (n+1)w - 1: simple cycles of
// positive sum stay non-negative, the others turn negative. The least
// progress measure yields a positional strategy winning wherever it is finite.
std::optional<std::vector<std::size_t>> positional_energy(const Mdp& mdp, std::size_t dim) {
  const std::size_t n = mdp.num_states();
  const auto scale = static_cast<std::int64_t>(n) + 1;
  auto w = [&](std::size_t e) { return scale * mdp.edges[e].weight[dim] - 1; };
  std::int64_t top = 0;
  for (std::size_t e = 0; e < mdp.num_edges(); ++e) top += std::max<std::int64_t>(0, -w(e));
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> f(n, 0);
  auto need = [&](std::size_t e) {
    auto t = f[mdp.edges[e].to];
    return t == inf ? inf : std::max<std::int64_t>(0, t - w(e));
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (f[s] == inf) continue;
      bool rnd = mdp.is_random(s);
      std::int64_t v = rnd ? 0 : inf;
      for (auto e : mdp.out(s)) v = rnd ? std::max(v, need(e)) : std::min(v, need(e));
      if (v > top) v = inf;
      if (v > f[s]) {
        f[s] = v;
        changed = true;
      }
    }
  }
  std::vector<std::size_t> choice(n, SIZE_MAX);
  for (std::size_t s = 0; s < n; ++s) {
    if (f[s] == inf) return std::nullopt;
    if (mdp.is_random(s)) continue;
    for (auto e : mdp.out(s))
      if (choice[s] == SIZE_MAX || need(e) < need(choice[s])) choice[s] = e;
  }
  return choice;
}

std::vector<std::array<std::size_t, 3>> memoryless_arcs(const Mdp& mdp, const std::vector<std::size_t>& choice) {
  std::vector<std::array<std::size_t, 3>> arcs;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_random(s)) {
      for (auto e : mdp.out(s)) arcs.push_back({s, mdp.edges[e].to, e});
    } else if (choice[s] != SIZE_MAX) {
      arcs.push_back({s, mdp.edges[choice[s]].to, choice[s]});
    }
  }
  return arcs;
}

std::size_t saturating_product(const std::vector<std::size_t>& radix, std::size_t cap) {
  std::size_t total = 1;
  for (auto r : radix) {
    if (r != 0 && total > cap / r) return cap + 1;
    total *= r;
  }
  return total;
}

}  // namespace

Phase1 phase1_strategy(const Mdp& mdp, const ThresholdSystem& sys, const std::vector<Rational>& a, std::size_t start) {
  const std::size_t n = mdp.num_states();
  Phase1 p;
  p.start = start;
  p.inflow.assign(n, Rational(0));
  p.switch_prob.assign(n, Rational(0));
  p.move.assign(n, {});
  p.inflow[start] = 1;
  for (std::size_t e = 0; e < mdp.num_edges(); ++e) p.inflow[mdp.edges[e].to] += a[sys.y_edge[e]];
  for (std::size_t s = 0; s < n; ++s) {
    const Rational& ys = a[sys.y_state[s]];
    if (p.inflow[s] > 0) p.switch_prob[s] = ys / p.inflow[s];
    if (mdp.is_random(s)) continue;
    Rational rest = p.inflow[s] - ys;
    if (rest > 0) {
      Rational sum(0);
      for (auto e : mdp.out(s)) {
        const Rational& ye = a[sys.y_edge[e]];
        if (ye > 0) {
          p.move[s].push_back({e, ye / rest});
          sum += ye / rest;
        }
      }
      if (sum != 1) throw std::logic_error("flow witness breaks conservation at " + mdp.states[s].id);
    } else if (!mdp.out(s).empty()) {
      p.move[s].push_back({mdp.out(s).front(), Rational(1)});
    }
  }
  return p;
}

std::vector<LocalComponent> local_strategies(const Mdp& mdp, const std::vector<std::size_t>& ec,
                                             const std::vector<Rational>& x_edge) {
  auto inside = internal_edges(mdp, ec);
  Rational total(0);
  std::vector<Rational> xs(mdp.num_states(), Rational(0));
  std::vector<bool> mask(mdp.num_edges(), false);
  for (auto e : inside)
    if (x_edge[e] > 0) {
      total += x_edge[e];
      xs[mdp.edges[e].from] += x_edge[e];
      mask[e] = true;
    }
  if (total <= 0) throw std::invalid_argument("end component carries no frequency");
  std::vector<LocalComponent> out;
  for (const auto& c : sccs(mdp, &mask)) {
    if (c.trivial || xs[c.nodes.front()] == 0) continue;
    LocalComponent l;
    l.states = c.nodes;
    l.nu.assign(mdp.dimension, Rational(0));
    l.g.assign(mdp.num_states(), {});
    Rational xi(0);
    for (auto s : c.nodes) {
      xi += xs[s];
      for (auto e : mdp.out(s)) {
        if (!mask[e]) continue;
        for (std::size_t i = 0; i < mdp.dimension; ++i) l.nu[i] += x_edge[e] * mdp.edges[e].weight[i];
        if (!mdp.is_random(s)) l.g[s].push_back({e, x_edge[e] / xs[s]});
      }
    }
    for (auto& v : l.nu) v /= xi;
    l.x = xi / total;
    out.push_back(std::move(l));
  }
  return out;
}

StrategyPtr global_unichain(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<LocalComponent>& locals,
                            std::int64_t A) {
  if (locals.empty()) throw std::invalid_argument("no local strategy to combine");
  if (A < 1) throw std::invalid_argument("A must be positive");
  auto g = std::make_shared<GlobalUnichain>(mdp, ec, locals, A);
  g->bind(mdp);
  return g;
}

std::vector<std::size_t> reach_strategy(const Mdp& mdp, const std::vector<std::size_t>& within,
                                        const std::vector<std::size_t>& target) {
  auto in = state_mask(mdp.num_states(), within);
  std::vector<bool> done(mdp.num_states(), false);
  std::vector<std::size_t> choice(mdp.num_states(), SIZE_MAX), queue;
  for (auto t : target) {
    done[t] = true;
    queue.push_back(t);
  }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    for (auto e : mdp.in(queue[h])) {
      auto s = mdp.edges[e].from;
      if (!in[s] || done[s]) continue;
      done[s] = true;
      if (!mdp.is_random(s)) choice[s] = e;
      queue.push_back(s);
    }
  }
  return choice;
}

std::int64_t recovery_length(std::int64_t K, std::int64_t W, const Rational& mu_star, const Rational& delta,
                             std::int64_t m) {
  if (delta <= 0) throw std::invalid_argument("delta must be positive");
  Rational num = Rational(2 * K) * (Rational(W) + mu_star - delta) + Rational(m) * (Rational(2 * W) + 2 * mu_star - delta);
  return ceil_int(num / delta);
}

WecCombined::WecCombined(const Mdp& mdp, StrategyPtr g, StrategyPtr fwc, Dims dims, WecParams p)
    : mdp_(&mdp), g_(std::move(g)), wc_(std::move(fwc)), dims_(std::move(dims)), p_(p) {
  if (p_.K < 1 || p_.L < 0) throw std::invalid_argument("bad period lengths");
  if (p_.delta <= 0 || p_.delta >= p_.mu_star) throw std::invalid_argument("delta must lie strictly between 0 and mu*");
  bar_ = (p_.mu_star - p_.delta) * p_.K;
}

Dist<Memory> WecCombined::wrap(std::int64_t kind, const Dist<Memory>& sub) const {
  Dist<Memory> d;
  for (const auto& [n, q] : sub) {
    Memory m{kind, 0};
    m.resize(2 + dims_.size(), 0);
    m.insert(m.end(), n.begin(), n.end());
    add_mass(d, std::move(m), q);
  }
  return d;
}

Dist<Memory> WecCombined::initial() const { return wrap(0, g_->initial()); }

Dist<std::size_t> WecCombined::output(std::size_t state, const Memory& m) const {
  Memory sub(m.begin() + static_cast<long>(2 + dims_.size()), m.end());
  return (m[0] == 0 ? g_ : wc_)->output(state, sub);
}

Dist<Memory> WecCombined::update(std::size_t edge, const Memory& m) const {
  const std::size_t D = dims_.size();
  Memory sub(m.begin() + static_cast<long>(2 + D), m.end());
  const std::int64_t j = m[1] + 1;
  if (m[0] == 1) {
    if (j >= p_.L) return wrap(0, g_->initial());
    auto d = wrap(1, wc_->update(edge, sub));
    for (auto& [n, _] : d) n[1] = j;
    return d;
  }
  std::vector<std::int64_t> sums(m.begin() + 2, m.begin() + static_cast<long>(2 + D));
  const auto& w = mdp_->edges[edge].weight;
  for (std::size_t k = 0; k < D; ++k) sums[k] += w[dims_[k]];
  if (j == p_.K) {
    bool pass = true;
    for (auto s : sums) pass = pass && Rational(s) >= bar_;
    return pass ? wrap(0, g_->update(edge, sub)) : wrap(1, wc_->initial());
  }
  // Clip once the verdict of the period is settled, keeping the product finite.
  const std::int64_t rest = (p_.K - j) * p_.W;
  const std::int64_t hi = ceil_int(bar_) + rest;
  const Rational lo = bar_ - rest;
  for (auto& s : sums) {
    if (s > hi) s = hi;
    if (Rational(s) < lo) s = floor_int(lo) - 1;
  }
  auto d = wrap(0, g_->update(edge, sub));
  for (auto& [n, _] : d) {
    n[1] = j;
    std::copy(sums.begin(), sums.end(), n.begin() + 2);
  }
  return d;
}

PhaseComposite::PhaseComposite(const Mdp& mdp, Phase1 p1, std::vector<std::vector<std::size_t>> components,
                               std::vector<StrategyPtr> inside, StrategyPtr fallback, std::int64_t N,
                               bool cap_to_fallback)
    : mdp_(&mdp),
      p1_(std::move(p1)),
      comp_of_(mdp.num_states(), -1),
      inside_(std::move(inside)),
      fallback_(std::move(fallback)),
      N_(N),
      cap_to_fallback_(cap_to_fallback) {
  if (components.size() != inside_.size()) throw std::invalid_argument("one machine per component expected");
  for (std::size_t k = 0; k < components.size(); ++k)
    for (auto s : components[k]) comp_of_[s] = static_cast<long>(k);
}

Dist<Memory> PhaseComposite::enter(std::int64_t tag, const Dist<Memory>& sub) const {
  Dist<Memory> d;
  for (const auto& [n, q] : sub) {
    Memory m{tag, 0};
    m.insert(m.end(), n.begin(), n.end());
    add_mass(d, std::move(m), q);
  }
  return d;
}

Dist<Memory> PhaseComposite::arrive(std::size_t state, std::int64_t steps) const {
  Dist<Memory> d;
  const Rational& p = p1_.switch_prob[state];
  const long c = comp_of_[state];
  auto go = [&](std::int64_t tag, const Rational& mass) {
    const auto& f = tag == fallback_tag() ? fallback_ : inside_[static_cast<std::size_t>(tag - 1)];
    if (!f) throw std::logic_error("no machine for phase " + std::to_string(tag) + " at " + mdp_->states[state].id);
    for (auto& [n, q] : enter(tag, f->initial())) add_mass(d, n, q * mass);
  };
  if (p > 0) {
    if (c < 0) throw std::logic_error("switching outside every component at " + mdp_->states[state].id);
    go(c + 1, p);
  }
  Rational rest = 1 - p;
  if (rest > 0) {
    if (N_ > 0 && steps >= N_) {
      if (c >= 0 && !cap_to_fallback_ && inside_[static_cast<std::size_t>(c)])
        go(c + 1, rest);
      else
        go(fallback_tag(), rest);
    } else {
      add_mass(d, Memory{kPhase1, steps}, rest);
    }
  }
  return d;
}

Dist<Memory> PhaseComposite::initial() const { return arrive(p1_.start, 0); }

Dist<std::size_t> PhaseComposite::output(std::size_t state, const Memory& m) const {
  if (m[0] == kPhase1) return p1_.move[state];
  const auto& f = m[0] == fallback_tag() ? fallback_ : inside_[static_cast<std::size_t>(m[0] - 1)];
  return f->output(state, Memory(m.begin() + 2, m.end()));
}

Dist<Memory> PhaseComposite::update(std::size_t edge, const Memory& m) const {
  if (m[0] == kPhase1) return arrive(mdp_->edges[edge].to, N_ > 0 ? m[1] + 1 : 0);
  const auto& f = m[0] == fallback_tag() ? fallback_ : inside_[static_cast<std::size_t>(m[0] - 1)];
  return enter(m[0], f->update(edge, Memory(m.begin() + 2, m.end())));
}

std::optional<ExplicitMachine> memoryless_wc_search(const Mdp& mdp, const Dims& dims, const WcSearchOptions& opt) {
  const std::size_t n = mdp.num_states();
  auto starts = all_states(mdp);
  std::vector<std::size_t> ctrl, radix;
  for (std::size_t s = 0; s < n; ++s)
    if (!mdp.is_random(s) && !mdp.out(s).empty()) {
      ctrl.push_back(s);
      radix.push_back(mdp.out(s).size());
    }
  auto finish = [&](ExplicitMachine m) -> std::optional<ExplicitMachine> {
    if (!wc_from(mdp, m, starts, dims).ok) throw std::logic_error("search result fails the worst-case check");
    return m;
  };
  std::vector<std::size_t> choice(n, SIZE_MAX);
  for (std::size_t k = 0; k < ctrl.size(); ++k) choice[ctrl[k]] = mdp.out(ctrl[k]).front();
  if (dims.empty()) return memoryless(mdp, choice);

  if (dims.size() == 1) {
    auto c = positional_energy(mdp, dims[0]);
    if (c && graph_wins(mdp, n, memoryless_arcs(mdp, *c), starts, dims)) return finish(memoryless(mdp, *c));
  }

  if (saturating_product(radix, opt.memoryless_budget) <= opt.memoryless_budget) {
    bool found = for_each_digits(radix, [&](const std::vector<std::size_t>& digit) {
      for (std::size_t k = 0; k < ctrl.size(); ++k) choice[ctrl[k]] = mdp.out(ctrl[k])[digit[k]];
      return graph_wins(mdp, n, memoryless_arcs(mdp, choice), starts, dims);
    });
    if (found) return finish(memoryless(mdp, choice));
  }

  // Two memory states: outputs per (state, memory), updates per (edge, memory).
  std::vector<std::size_t> radix2;
  for (auto r : radix) {
    radix2.push_back(r);
    radix2.push_back(r);
  }
  const std::size_t m = mdp.num_edges();
  radix2.insert(radix2.end(), 2 * m, 2);
  if (saturating_product(radix2, opt.two_memory_budget) > opt.two_memory_budget) return std::nullopt;
  std::vector<std::size_t> starts2;
  for (auto s : starts) starts2.push_back(2 * s);
  std::vector<std::size_t> best;
  bool found = for_each_digits(radix2, [&](const std::vector<std::size_t>& digit) {
    std::vector<std::array<std::size_t, 3>> arcs;
    std::vector<std::size_t> pick(2 * n, SIZE_MAX);
    for (std::size_t k = 0; k < ctrl.size(); ++k)
      for (std::size_t mem = 0; mem < 2; ++mem) pick[2 * ctrl[k] + mem] = mdp.out(ctrl[k])[digit[2 * k + mem]];
    const std::size_t base = 2 * ctrl.size();
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t mem = 0; mem < 2; ++mem) {
        auto emit = [&](std::size_t e) { arcs.push_back({2 * s + mem, 2 * mdp.edges[e].to + digit[base + 2 * e + mem], e}); };
        if (mdp.is_random(s))
          for (auto e : mdp.out(s)) emit(e);
        else if (pick[2 * s + mem] != SIZE_MAX)
          emit(pick[2 * s + mem]);
      }
    if (!graph_wins(mdp, 2 * n, arcs, starts2, dims)) return false;
    best = digit;
    return true;
  });
  if (!found) return std::nullopt;
  ExplicitMachine machine(mdp, 2);
  machine.alpha = {{0, Rational(1)}};
  for (std::size_t k = 0; k < ctrl.size(); ++k)
    for (std::int64_t mem = 0; mem < 2; ++mem)
      machine.set_output(ctrl[k], mem, {{mdp.out(ctrl[k])[best[2 * k + static_cast<std::size_t>(mem)]], Rational(1)}});
  const std::size_t base = 2 * ctrl.size();
  for (std::size_t e = 0; e < m; ++e)
    for (std::int64_t mem = 0; mem < 2; ++mem)
      machine.set_update(e, mem, {{static_cast<std::int64_t>(best[base + 2 * e + static_cast<std::size_t>(mem)]), Rational(1)}});
  return finish(std::move(machine));
}

WorstCaseReport verify_worstcase_everywhere(const Mdp& mdp, const Strategy& f, const Dims& dims) {
  return wc_from(mdp, f, all_states(mdp), dims);
}

std::optional<Rational> worstcase_margin(const Mdp& mdp, const Strategy& f, const Dims& dims) {
  return margin_from(mdp, f, all_states(mdp), dims);
}

ComponentMachine unichain_for(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<Rational>& x_edge,
                              const std::vector<Rational>& target, std::int64_t max_A, std::int64_t* A_used) {
  auto locals = local_strategies(mdp, ec, x_edge);
  ComponentMachine cm;
  for (std::int64_t A = 1;; A *= 2) {
    cm.machine = global_unichain(mdp, ec, locals, A);
    auto bs = bscc_analysis(induced_chain(mdp, *cm.machine, ec));
    cm.expectation = expected_mp(bs, mdp.dimension);
    cm.unichain = bs.size() == 1;
    if (A_used) *A_used = A;
    if ((cm.unichain && dominates(cm.expectation, target)) || locals.size() == 1 || 2 * A > max_A) return cm;
  }
}

json Synthesis::to_json() const {
  json j;
  j["ok"] = ok;
  j["message"] = message;
  if (N) j["N"] = N;
  if (A) j["A"] = A;
  if (K) j["K"] = K;
  if (expectation) j["expectation"] = vector_json(*expectation);
  if (worst_case) j["worst_case"] = *worst_case;
  if (almost_sure) j["almost_sure"] = *almost_sure;
  j["notes"] = notes;
  return j;
}

namespace {

bool usable(const Decision& d, std::initializer_list<Mode> modes, std::string& why) {
  if (std::find(modes.begin(), modes.end(), d.mode) == modes.end()) {
    why = "synthesis for mode " + to_string(d.mode) + " is not handled here";
    return false;
  }
  if (!d.answer) {
    why = "the threshold problem has answer no (stage " + d.stage + ")";
    return false;
  }
  return true;
}

// Pure strategies on U whose memory is a task counter: it advances by one
// (mod M) on every controller move. Accepted when worst-case safe from every
// state of U and every reachable BSCC beats target. Exhaustive up to the
// budget; each candidate is checked exactly.
std::optional<ExplicitMachine> counter_search(const Mdp& mdp, const std::vector<std::size_t>& U, const Dims& dims,
                                              const std::vector<Rational>& target, std::size_t max_memory,
                                              std::size_t budget) {
  auto inside = state_mask(mdp.num_states(), U);
  std::vector<std::size_t> ctrl;
  std::vector<std::vector<std::size_t>> moves(mdp.num_states());
  for (auto s : U) {
    for (auto e : mdp.out(s))
      if (inside[mdp.edges[e].to]) moves[s].push_back(e);
    if (!mdp.is_random(s)) ctrl.push_back(s);
  }
  std::size_t spent = 0;
  for (std::size_t M = 1; M <= max_memory; ++M) {
    std::vector<std::size_t> radix;
    double count = 1;
    for (std::size_t j = 0; j < M; ++j)
      for (auto s : ctrl) {
        radix.push_back(moves[s].size());
        count *= static_cast<double>(moves[s].size());
      }
    if (static_cast<double>(spent) + count > static_cast<double>(budget)) return std::nullopt;
    spent += static_cast<std::size_t>(count);
    const std::size_t n = mdp.num_states() * M;
    std::vector<std::size_t> starts;
    for (auto s : U) starts.push_back(s * M);
    std::vector<std::array<std::size_t, 3>> fixed;
    for (auto s : U)
      if (mdp.is_random(s))
        for (std::size_t j = 0; j < M; ++j)
          for (auto e : moves[s]) fixed.push_back({s * M + j, mdp.edges[e].to * M + j, e});
    std::optional<ExplicitMachine> found;
    for_each_digits(radix, [&](const std::vector<std::size_t>& digit) {
      auto arcs = fixed;
      for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < ctrl.size(); ++k) {
          auto e = moves[ctrl[k]][digit[j * ctrl.size() + k]];
          arcs.push_back({ctrl[k] * M + j, mdp.edges[e].to * M + (j + 1) % M, e});
        }
      if (!graph_wins(mdp, n, arcs, starts, dims)) return false;
      ExplicitMachine m(mdp, M);
      m.alpha = {{0, Rational(1)}};
      for (std::size_t j = 0; j < M; ++j) {
        auto mj = static_cast<std::int64_t>(j);
        for (std::size_t k = 0; k < ctrl.size(); ++k) {
          auto e = moves[ctrl[k]][digit[j * ctrl.size() + k]];
          m.set_output(ctrl[k], mj, {{e, Rational(1)}});
          m.set_update(e, mj, {{static_cast<std::int64_t>((j + 1) % M), Rational(1)}});
        }
        for (auto s : U)
          if (mdp.is_random(s))
            for (auto e : moves[s]) m.set_update(e, mj, {{mj, Rational(1)}});
      }
      for (const auto& b : bscc_analysis(induced_chain(mdp, m, U)))
        if (!dominates(b.value, target)) return false;
      found = std::move(m);
      return true;
    });
    if (found) return found;
  }
  return std::nullopt;
}

struct BwcParts {
  Phase1 p1;
  std::vector<std::vector<std::size_t>> comps;
  std::vector<StrategyPtr> inside;
  StrategyPtr fwc;
  std::int64_t A = 0, K = 0;
};

std::optional<BwcParts> build_bwc_parts(const Decision& d, const SynthesisOptions& opt, Synthesis& out) {
  const Mdp& mdp = d.working;
  auto fwc = memoryless_wc_search(mdp, d.dims, opt.wc);
  if (!fwc) {
    out.message = "decision yes, constructive fallback unavailable: no worst-case strategy within the search budget";
    return std::nullopt;
  }
  BwcParts parts;
  parts.fwc = std::make_shared<ExplicitMachine>(std::move(*fwc));
  auto flow = read_flow(d);
  parts.p1 = phase1_strategy(mdp, *d.system, flow.assignment, d.start);
  for (std::size_t k = 0; k < d.components.size(); ++k) {
    const auto& U = d.components[k];
    parts.comps.push_back(U.states);
    if (flow.mass[k] == 0) {
      parts.inside.push_back(parts.fwc);
      continue;
    }
    auto target = component_target(flow, k, d.dims);
    std::int64_t A = 0;
    auto cm = unichain_for(mdp, U.states, edges_of(flow, U), target, opt.max_A, &A);
    parts.A = std::max(parts.A, A);
    const std::string name = "component " + std::to_string(k);
    if (wc_from(mdp, *cm.machine, U.states, d.dims).ok) {
      out.notes.push_back(name + ": the expectation machine is worst-case safe on its own");
      parts.inside.push_back(cm.machine);
      continue;
    }
    Mdp sub = restrict_to(mdp, U.states);
    auto fu = memoryless_wc_search(sub, d.dims, opt.wc);
    if (!fu) {
      out.message = name + ": no worst-case strategy found inside the component";
      return std::nullopt;
    }
    auto fuw = std::make_shared<ExplicitMachine>(rebind(*fu, mdp));
    auto margin = margin_from(mdp, *fuw, U.states, d.dims);
    Rational mu_star = margin ? *margin : Rational(1);
    for (auto i : d.dims) mu_star = std::min(mu_star, cm.expectation[i]);
    if (mu_star <= 0) {
      out.message = name + ": expectation machine is not positive on the worst-case dimensions";
      return std::nullopt;
    }
    WecParams p;
    p.mu_star = mu_star;
    p.delta = mu_star / 2;
    p.W = mdp.max_abs_weight();
    p.m = static_cast<std::int64_t>(fuw->memory_size() * U.states.size());
    bool done = false;
    std::string why;
    for (std::int64_t K = 2; K <= opt.max_K && !done; K *= 2) {
      p.K = K;
      p.L = recovery_length(K, p.W, p.mu_star, p.delta, p.m);
      auto comb = std::make_shared<WecCombined>(mdp, cm.machine, fuw, d.dims, p);
      try {
        auto chain = induced_chain(mdp, *comb, U.states, opt.max_combined);
        if (!verify_worstcase(chain, wc_mu(mdp, d.dims)).ok) continue;
        auto e = expected_mp(chain);
        if (!dominates(e, target)) continue;
        out.notes.push_back(name + ": combined machine with K=" + std::to_string(K) + ", L=" + std::to_string(p.L));
        parts.K = std::max(parts.K, K);
        parts.inside.push_back(comb);
        done = true;
      } catch (const std::length_error&) {
        why = "combined machine exceeds the exact verification budget at K=" + std::to_string(K);
        break;
      }
    }
    if (!done) {
      if (why.empty()) why = "no period length up to " + std::to_string(opt.max_K) + " verified";
      // Any component value above nu_U - gap keeps the mass-weighted total above nu.
      std::vector<Rational> floor(mdp.dimension);
      for (std::size_t i = 0; i < floor.size(); ++i) floor[i] = flow.nu[k][i] - flow.gap[i];
      auto counter = counter_search(mdp, U.states, d.dims, floor, opt.counter_memory, opt.counter_budget);
      if (!counter) {
        out.message = name + ": " + why + "; no counter strategy within the search budget";
        return std::nullopt;
      }
      out.notes.push_back(name + ": " + why + "; using a counter strategy with memory " +
                          std::to_string(counter->memory_size()));
      parts.inside.push_back(std::make_shared<ExplicitMachine>(std::move(*counter)));
    }
  }
  return parts;
}

void fill_bwc(const Decision& d, const BwcParts& parts, std::int64_t N, const SynthesisOptions& opt, Synthesis& out) {
  auto f = std::make_shared<PhaseComposite>(d.working, parts.p1, parts.comps, parts.inside, parts.fwc, N);
  out.strategy = f;
  out.N = N;
  out.A = parts.A;
  out.K = parts.K;
  auto chain = induced_chain(d.working, *f, d.start, std::nullopt, opt.max_chain);
  out.worst_case = verify_worstcase(chain, wc_mu(d.working, d.dims)).ok;
  out.expectation = expected_mp(chain);
  out.ok = *out.worst_case && dominates(*out.expectation, d.normalized.query.nu);
  out.message = out.ok ? "verified" : (*out.worst_case ? "expectation not above nu" : "worst-case check failed");
}

}  // namespace

ExplicitMachine export_machine(const Decision& d, const Strategy& f, const Mdp& original, std::size_t max_pairs) {
  const Mdp& w = d.working;
  if (d.prestate) {
    auto pre_edge = w.out(d.start).front();
    return rebind(explicitize(w, f, w.edges[pre_edge].to, pre_edge, max_pairs), original);
  }
  return rebind(explicitize(w, f, d.start, std::nullopt, max_pairs), original);
}

Synthesis bwc_finite_strategy(const Decision& d, std::int64_t N, const SynthesisOptions& opt) {
  Synthesis out;
  if (!usable(d, {Mode::BwcFin}, out.message)) return out;
  auto parts = build_bwc_parts(d, opt, out);
  if (!parts) return out;
  try {
    fill_bwc(d, *parts, N, opt, out);
  } catch (const std::length_error& e) {
    out.ok = false;
    out.message = e.what();
  }
  return out;
}

Synthesis synthesize_bwc_finite(const Decision& d, const SynthesisOptions& opt) {
  Synthesis out;
  if (!usable(d, {Mode::BwcFin}, out.message)) return out;
  auto parts = build_bwc_parts(d, opt, out);
  if (!parts) return out;
  try {
    for (std::int64_t N = 1; N <= opt.max_N; N *= 2) {
      fill_bwc(d, *parts, N, opt, out);
      out.notes.push_back("N=" + std::to_string(N) + ": expectation " + to_string(*out.expectation) +
                          (*out.worst_case ? ", worst case holds" : ", worst case FAILS"));
      if (!*out.worst_case || out.ok) return out;
    }
  } catch (const std::length_error& e) {
    out.ok = false;
    out.message = e.what();
    return out;
  }
  out.message = "no phase I cap up to " + std::to_string(opt.max_N) + " lifts the expectation above nu";
  return out;
}

Synthesis bas_strategy(const Decision& d, const SynthesisOptions& opt) {
  Synthesis out;
  if (!usable(d, {Mode::Bas, Mode::Exp}, out.message)) return out;
  const Mdp& mdp = d.working;
  auto flow = read_flow(d);
  const Dims positive = d.mode == Mode::Bas ? all_dimensions(mdp.dimension) : Dims{};
  auto p1 = phase1_strategy(mdp, *d.system, flow.assignment, d.start);
  std::vector<std::vector<std::size_t>> comps;
  std::vector<StrategyPtr> inside;
  for (std::size_t k = 0; k < d.components.size(); ++k) {
    comps.push_back(d.components[k].states);
    if (flow.mass[k] == 0) {
      inside.push_back(nullptr);
      continue;
    }
    std::int64_t A = 0;
    auto cm = unichain_for(mdp, d.components[k].states, edges_of(flow, d.components[k]),
                           component_target(flow, k, positive), opt.max_A, &A);
    out.A = std::max(out.A, A);
    if (!cm.unichain) out.notes.push_back("component " + std::to_string(k) + ": machine is not unichain at A=" + std::to_string(A));
    inside.push_back(cm.machine);
  }
  auto f = std::make_shared<PhaseComposite>(mdp, p1, comps, inside, nullptr, 0);
  out.strategy = f;
  try {
    auto bs = bscc_analysis(induced_chain(mdp, *f, d.start, std::nullopt, opt.max_chain));
    out.expectation = expected_mp(bs, mdp.dimension);
    bool exp_ok = dominates(*out.expectation, d.normalized.query.nu);
    if (d.mode == Mode::Bas) out.almost_sure = verify_almost_sure(bs, d.normalized.query.mu);
    out.ok = exp_ok && out.almost_sure.value_or(true);
    out.message = out.ok ? "verified" : (!exp_ok ? "expectation not above nu" : "some recurrent class is not above mu");
  } catch (const std::length_error& e) {
    out.message = e.what();
  }
  return out;
}

std::vector<Rational> fk_bound(const std::vector<Rational>& nu, std::int64_t i, std::int64_t K) {
  std::vector<Rational> b;
  for (const auto& v : nu) b.push_back(v * i * K / 2);
  return b;
}

InfiniteSynthesis bwc_infinite_strategy(const Decision& d, std::int64_t K, const SynthesisOptions& opt) {
  InfiniteSynthesis out;
  if (!usable(d, {Mode::BwcInf}, out.message)) return out;
  if (K < 1) throw std::invalid_argument("K must be positive");
  const Mdp& mdp = d.working;
  auto fwc = memoryless_wc_search(mdp, d.dims, opt.wc);
  if (!fwc) {
    out.message = "decision yes, constructive fallback unavailable: no worst-case strategy within the search budget";
    return out;
  }
  auto fwc_ptr = std::make_shared<ExplicitMachine>(*fwc);
  auto flow = read_flow(d);
  InfiniteStrategy f;
  f.mdp = &mdp;
  f.K = K;
  f.dims = d.dims;
  f.phase1 = phase1_strategy(mdp, *d.system, flow.assignment, d.start);
  f.wc = *fwc;
  f.map = d.normalized.map;
  if (d.prestate) f.prestate = mdp.state_index(*d.prestate);
  std::vector<std::vector<std::size_t>> comps;
  std::vector<StrategyPtr> inside, safe;
  for (std::size_t k = 0; k < d.components.size(); ++k) {
    if (flow.mass[k] == 0) continue;
    const auto& U = d.components[k];
    std::int64_t A = 0;
    auto cm = unichain_for(mdp, U.states, edges_of(flow, U), component_target(flow, k, d.dims), opt.max_A, &A);
    if (!cm.unichain) out.notes.push_back("component " + std::to_string(k) + ": machine is not unichain at A=" + std::to_string(A));
    FkComponent c{U.states, explicitize(mdp, *cm.machine, U.states, opt.max_chain), cm.expectation, {}};
    c.nu.assign(mdp.dimension, Rational(0));
    for (auto i : d.dims) c.nu[i] = cm.expectation[i] / 2;
    comps.push_back(U.states);
    inside.push_back(std::make_shared<ExplicitMachine>(c.exp));
    safe.push_back(fwc_ptr);
    f.components.push_back(std::move(c));
  }
  try {
    for (std::int64_t N = 1; N <= opt.max_N; N *= 2) {
      PhaseComposite nominal(mdp, f.phase1, comps, inside, fwc_ptr, N, true);
      f.N = N;
      f.nominal = expected_mp(induced_chain(mdp, nominal, d.start, std::nullopt, opt.max_chain));
      if (dominates(f.nominal, d.normalized.query.nu)) break;
    }
    // Every play that leaves phase I by the cap or by a monitor ends in f^wc.
    PhaseComposite guarded(mdp, f.phase1, comps, safe, fwc_ptr, f.N, true);
    if (!verify_worstcase(induced_chain(mdp, guarded, d.start, std::nullopt, opt.max_chain), wc_mu(mdp, d.dims)).ok) {
      out.message = "phase I followed by the worst-case strategy fails the worst-case check";
      return out;
    }
  } catch (const std::length_error& e) {
    out.message = e.what();
    return out;
  }
  out.ok = dominates(f.nominal, d.normalized.query.nu);
  out.message = out.ok ? "ingredients verified; monitored behaviour is checked by simulation"
                       : "nominal expectation not above nu";
  out.strategy = std::move(f);
  return out;
}

json InfiniteStrategy::to_json() const {
  const Mdp& m = *mdp;
  json j;
  j["kind"] = "f_K";
  j["K"] = K;
  j["N"] = N;
  j["dims"] = dims;
  std::size_t start = phase1.start;
  std::int64_t steps = start_steps;
  if (prestate && *prestate == start) {
    start = m.edges[m.out(start).front()].to;
    steps += 1;
  }
  j["start"] = m.states[start].id;
  j["start_steps"] = steps;
  json scale = json::array(), shift = json::array();
  for (const auto& v : map.scale) scale.push_back(v.get_str());
  for (const auto& v : map.shift) shift.push_back(v.get_str());
  j["normalization"] = {{"scale", scale}, {"shift", shift}};
  json sw = json::object(), mv = json::object();
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    if (prestate && s == *prestate) continue;
    if (phase1.switch_prob[s] > 0) sw[m.states[s].id] = to_string(phase1.switch_prob[s]);
    if (phase1.move[s].empty()) continue;
    json row = json::object();
    for (const auto& [e, p] : phase1.move[s]) row[std::to_string(m.edges[e].id)] = to_string(p);
    mv[m.states[s].id] = row;
  }
  j["phase1"] = {{"switch", sw}, {"move", mv}};
  j["components"] = json::array();
  for (const auto& c : components)
    j["components"].push_back({{"states", state_ids(m, c.states)},
                               {"exp", machine_to_json(c.exp)},
                               {"expectation", vector_json(c.expectation)},
                               {"nu", vector_json(c.nu)}});
  if (wc) j["wc"] = machine_to_json(*wc);
  j["nominal"] = vector_json(nominal);
  return j;
}

InfiniteStrategy infinite_from_json(const Mdp& mdp, const json& j) {
  try {
    if (j.at("kind") != "f_K") throw ModelError("not an f_K strategy");
    InfiniteStrategy f;
    f.mdp = &mdp;
    f.K = j.at("K").get<std::int64_t>();
    f.N = j.at("N").get<std::int64_t>();
    if (f.K < 1 || f.N < 0) throw ModelError("f_K needs K >= 1 and N >= 0");
    f.dims = j.at("dims").get<Dims>();
    for (auto i : f.dims)
      if (i >= mdp.dimension) throw ModelError("f_K dimension out of range");
    const std::size_t n = mdp.num_states();
    f.phase1.start = mdp.state_index(j.at("start").get<std::string>());
    f.start_steps = j.at("start_steps").get<std::int64_t>();
    f.phase1.inflow.assign(n, Rational(0));
    f.phase1.switch_prob.assign(n, Rational(0));
    f.phase1.move.assign(n, {});
    for (const auto& [id, p] : j.at("phase1").at("switch").items()) f.phase1.switch_prob[mdp.state_index(id)] = rational_from_json(p);
    for (const auto& [id, row] : j.at("phase1").at("move").items()) {
      auto s = mdp.state_index(id);
      for (const auto& [e, p] : row.items()) f.phase1.move[s].push_back({mdp.edge_index(std::stoll(e)), rational_from_json(p)});
    }
    const auto& norm = j.at("normalization");
    for (const auto& v : norm.at("scale")) f.map.scale.emplace_back(v.get<std::string>());
    for (const auto& v : norm.at("shift")) f.map.shift.emplace_back(v.get<std::string>());
    if (f.map.scale.size() != mdp.dimension || f.map.shift.size() != mdp.dimension)
      throw ModelError("normalization does not match the MDP dimension");
    f.apply_map = true;
    for (const auto& c : j.at("components")) {
      FkComponent fc{{}, machine_from_json(mdp, c.at("exp")), {}, {}};
      for (const auto& id : c.at("states")) fc.states.push_back(mdp.state_index(id.get<std::string>()));
      for (const auto& v : c.at("expectation")) fc.expectation.push_back(rational_from_json(v));
      for (const auto& v : c.at("nu")) fc.nu.push_back(rational_from_json(v));
      if (fc.nu.size() != mdp.dimension) throw ModelError("component target has the wrong dimension");
      f.components.push_back(std::move(fc));
    }
    if (j.contains("wc")) f.wc = machine_from_json(mdp, j.at("wc"));
    if (!f.wc) throw ModelError("f_K strategy lacks its worst-case machine");
    for (const auto& v : j.at("nominal")) f.nominal.push_back(rational_from_json(v));
    return f;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed f_K strategy: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("malformed f_K strategy: ") + e.what());
  }
}

}  // namespace mpmdp
