#include "mpmdp/worstcase.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

#include "mpmdp/lp.hpp"

namespace mpmdp {

Dims active_dimensions(const std::vector<bool>& trivial) {
  Dims d;
  for (std::size_t i = 0; i < trivial.size(); ++i)
    if (!trivial[i]) d.push_back(i);
  return d;
}

Dims all_dimensions(std::size_t d) {
  Dims r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = i;
  return r;
}

std::vector<std::size_t> WinningRegion::states() const {
  std::vector<std::size_t> r;
  for (std::size_t s = 0; s < winning.size(); ++s)
    if (winning[s]) r.push_back(s);
  return r;
}

std::optional<Rational> positive_multicycle(const Mdp& mdp, const std::vector<std::size_t>& edges, const Dims& dims) {
  if (edges.empty()) return std::nullopt;
  // Shifting every weight by W keeps the slack non-negative: y' = y + W.
  std::int64_t W = 0;
  for (auto e : edges)
    for (auto i : dims) W = std::max<std::int64_t>(W, std::abs(mdp.edges[e].weight[i]));
  LinearSystem sys;
  std::map<std::size_t, std::vector<Term>> flow;
  std::vector<Term> total;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto v = sys.add_variable("x" + std::to_string(mdp.edges[edges[k]].id));
    total.push_back({v, Rational(1)});
    flow[mdp.edges[edges[k]].from].push_back({v, Rational(-1)});
    flow[mdp.edges[edges[k]].to].push_back({v, Rational(1)});
  }
  sys.add(total, Relation::Eq, Rational(1), "mass");
  for (auto& [s, terms] : flow) sys.add(terms, Relation::Eq, Rational(0), "flow_" + mdp.states[s].id);
  if (dims.empty()) return Rational(0);
  for (auto i : dims) {
    std::vector<Term> row;
    for (std::size_t k = 0; k < edges.size(); ++k) row.push_back({k, Rational(mdp.edges[edges[k]].weight[i] + W)});
    sys.add(row, Relation::Gt, Rational(0), "dim" + std::to_string(i));
  }
  auto out = solve(sys);
  if (out.status != LpOutcome::Status::Feasible) throw std::logic_error("multicycle LP: unexpected status");
  return *out.slack - W;
}

namespace {

std::vector<std::size_t> random_states(const Mdp& mdp) {
  std::vector<std::size_t> r;
  for (std::size_t s = 0; s < mdp.num_states(); ++s)
    if (mdp.is_random(s)) r.push_back(s);
  return r;
}

class OnePlayerSolver {
 public:
  OnePlayerSolver(const Mdp& mdp, const Dims& dims) : mdp_(mdp), dims_(dims) {}

  std::vector<bool> winning(const AdversaryChoice& sigma) {
    const std::size_t n = mdp_.num_states();
    std::vector<bool> kept(mdp_.num_edges(), false);
    for (std::size_t s = 0; s < n; ++s) {
      if (mdp_.is_random(s)) kept[sigma[s]] = true;
      else
        for (auto e : mdp_.out(s)) kept[e] = true;
    }
    auto comps = sccs(mdp_, &kept);
    std::vector<std::size_t> comp_of(n);
    for (std::size_t c = 0; c < comps.size(); ++c)
      for (auto s : comps[c].nodes) comp_of[s] = c;
    std::vector<bool> win(n, false);
    std::vector<std::size_t> work;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (comps[c].trivial) continue;
      std::vector<std::size_t> es;
      for (auto s : comps[c].nodes)
        for (auto e : mdp_.out(s))
          if (kept[e] && comp_of[mdp_.edges[e].to] == c) es.push_back(e);
      if (!good(es)) continue;
      for (auto s : comps[c].nodes) win[s] = true, work.push_back(s);
    }
    while (!work.empty()) {
      auto v = work.back();
      work.pop_back();
      for (auto e : mdp_.in(v)) {
        if (!kept[e]) continue;
        auto u = mdp_.edges[e].from;
        if (!win[u]) win[u] = true, work.push_back(u);
      }
    }
    return win;
  }

 private:
  bool good(const std::vector<std::size_t>& es) {
    auto it = cache_.find(es);
    if (it != cache_.end()) return it->second;
    auto y = positive_multicycle(mdp_, es, dims_);
    bool g = y && *y > 0;
    cache_.emplace(es, g);
    return g;
  }

  const Mdp& mdp_;
  const Dims& dims_;
  std::map<std::vector<std::size_t>, bool> cache_;
};

// Mixed-radix walk over all memoryless adversary choices; stops when f returns false.
template <class F>
void for_each_choice(const Mdp& mdp, std::size_t cap, F f) {
  auto rs = random_states(mdp);
  double count = 1;
  for (auto r : rs) count *= static_cast<double>(mdp.out(r).size());
  if (count > static_cast<double>(cap))
    throw std::runtime_error("adversary enumeration needs " + std::to_string(static_cast<long double>(count)) +
                             " choices, above the cap of " + std::to_string(cap));
  AdversaryChoice sigma(mdp.num_states(), SIZE_MAX);
  std::vector<std::size_t> digit(rs.size(), 0);
  for (std::size_t k = 0; k < rs.size(); ++k) sigma[rs[k]] = mdp.out(rs[k])[0];
  while (true) {
    if (!f(sigma)) return;
    std::size_t k = 0;
    while (k < rs.size()) {
      if (++digit[k] < mdp.out(rs[k]).size()) {
        sigma[rs[k]] = mdp.out(rs[k])[digit[k]];
        break;
      }
      digit[k] = 0;
      sigma[rs[k]] = mdp.out(rs[k])[0];
      ++k;
    }
    if (k == rs.size()) return;
  }
}

}  // namespace

std::vector<bool> one_player_winning(const Mdp& mdp, const AdversaryChoice& sigma, const Dims& dims) {
  OnePlayerSolver solver(mdp, dims);
  return solver.winning(sigma);
}

WinningRegion wc_winning_region(const Mdp& mdp, const Dims& dims, const WcOptions& opt) {
  const std::size_t n = mdp.num_states();
  WinningRegion region;
  region.winning.assign(n, true);
  region.certificate.assign(n, std::nullopt);
  if (dims.empty()) return region;

  bool enumerate = true;
  if (dims.size() == 1) {
    auto values = wc_value_unidim(mdp, dims[0]);
    for (std::size_t s = 0; s < n; ++s) region.winning[s] = values[s] > 0;
    double count = 1;
    for (auto r : random_states(mdp)) count *= static_cast<double>(mdp.out(r).size());
    enumerate = opt.certificates && count <= static_cast<double>(opt.adversary_cap) &&
                std::find(region.winning.begin(), region.winning.end(), false) != region.winning.end();
    if (!enumerate) return region;
  }

  OnePlayerSolver solver(mdp, dims);
  std::vector<bool> win(n, true);
  bool unidim = dims.size() == 1;
  for_each_choice(mdp, opt.adversary_cap, [&](const AdversaryChoice& sigma) {
    auto w = solver.winning(sigma);
    bool pending = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (!w[s] && win[s]) {
        win[s] = false;
        region.certificate[s] = sigma;
      }
      if (unidim ? (!region.winning[s] && !region.certificate[s]) : bool(win[s])) pending = true;
    }
    return pending;
  });
  if (!unidim) region.winning = win;
  return region;
}

std::vector<Rational> wc_value_unidim(const Mdp& mdp, std::size_t dim) {
  const std::size_t n = mdp.num_states();
  std::int64_t W = 0;
  for (const auto& e : mdp.edges) W = std::max<std::int64_t>(W, std::abs(e.weight[dim]));
  std::vector<Rational> values(n, Rational(0));
  if (W == 0) return values;
  // |v_k/k - value| <= 2nW/k and distinct values (denominators <= n) differ by
  // at least 1/(n(n-1)), so k > 4 n^2 (n-1) W isolates each value.
  const std::int64_t N = static_cast<std::int64_t>(n);
  const std::int64_t k = 4 * N * N * std::max<std::int64_t>(N - 1, 1) * W + 1;
  std::vector<std::int64_t> v(n, 0), next(n);
  for (std::int64_t it = 0; it < k; ++it) {
    for (std::size_t s = 0; s < n; ++s) {
      bool rnd = mdp.is_random(s);
      std::int64_t best = rnd ? std::numeric_limits<std::int64_t>::max() : std::numeric_limits<std::int64_t>::min();
      for (auto e : mdp.out(s)) {
        std::int64_t c = mdp.edges[e].weight[dim] + v[mdp.edges[e].to];
        best = rnd ? std::min(best, c) : std::max(best, c);
      }
      next[s] = best;
    }
    v.swap(next);
  }
  for (std::size_t s = 0; s < n; ++s) {
    Rational approx(v[s], k);
    approx.canonicalize();
    Rational tol(2 * N * W, k);
    tol.canonicalize();
    bool found = false;
    for (std::int64_t q = 1; q <= N && !found; ++q) {
      Rational scaled = approx * q;
      Integer p;
      // nearest integer to scaled
      Rational shifted = scaled + Rational(1, 2);
      mpz_fdiv_q(p.get_mpz_t(), shifted.get_num_mpz_t(), shifted.get_den_mpz_t());
      Rational cand(p, Integer(q));
      cand.canonicalize();
      if (abs(cand - approx) <= tol) {
        values[s] = cand;
        found = true;
      }
    }
    if (!found) throw std::logic_error("value iteration did not isolate a value");
  }
  return values;
}

std::vector<EndComponent> mwecs(const Mdp& mdp, const Dims& dims, const WcOptions& opt) {
  std::vector<EndComponent> result;
  auto recurse = [&](auto&& self, const Mdp& sub) -> void {
    for (const auto& m : mecs(sub)) {
      Mdp local = restrict_to(sub, m.states);
      auto region = wc_winning_region(local, dims, opt);
      auto win = region.states();
      if (win.size() == local.num_states()) {
        std::vector<std::size_t> states;
        for (const auto& st : local.states) states.push_back(mdp.state_index(st.id));
        std::sort(states.begin(), states.end());
        result.push_back({states, internal_edges(mdp, states)});
      } else if (!win.empty()) {
        self(self, induce(local, win));
      }
    }
  };
  recurse(recurse, mdp);
  std::sort(result.begin(), result.end(),
            [](const EndComponent& a, const EndComponent& b) { return a.states.front() < b.states.front(); });
  return result;
}

std::optional<Pruned> prune(const Mdp& mdp, std::size_t s0, const Dims& dims, const WcOptions& opt) {
  auto region = wc_winning_region(mdp, dims, opt);
  if (!region.winning[s0]) return std::nullopt;
  Mdp sub = induce(mdp, region.states());
  std::size_t start = sub.state_index(mdp.states[s0].id);
  Mdp reach = induce(sub, reachable(sub, start));
  return Pruned{std::move(reach), std::move(region)};
}

}  // namespace mpmdp
