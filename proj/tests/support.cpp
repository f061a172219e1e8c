#include "support.hpp"

#include <algorithm>
#include <map>

#include "mpmdp/graph.hpp"

namespace oracle {

using namespace mpmdp;

Mdp random_mdp(std::mt19937_64& rng, const RandomMdpConfig& cfg) {
  auto uni = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  Mdp m;
  std::size_t n = static_cast<std::size_t>(uni(static_cast<std::int64_t>(cfg.min_states), static_cast<std::int64_t>(cfg.max_states)));
  m.dimension = cfg.fixed_dim ? cfg.fixed_dim : static_cast<std::size_t>(uni(1, static_cast<std::int64_t>(cfg.max_dim)));
  std::bernoulli_distribution coin(cfg.random_share);
  for (std::size_t s = 0; s < n; ++s) m.add_state("q" + std::to_string(s), coin(rng) ? Owner::Random : Owner::Controller);
  std::int64_t id = 0;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t k = static_cast<std::size_t>(uni(1, static_cast<std::int64_t>(cfg.max_outdegree)));
    std::vector<std::int64_t> units(k, 1);
    int q = 1;
    if (m.states[s].owner == Owner::Random) {
      k = std::min<std::size_t>(k, static_cast<std::size_t>(cfg.max_denominator));
      units.assign(k, 1);
      q = static_cast<int>(uni(static_cast<std::int64_t>(k), cfg.max_denominator));
      for (int extra = q - static_cast<int>(k); extra > 0; --extra) ++units[static_cast<std::size_t>(uni(0, static_cast<std::int64_t>(k) - 1))];
    }
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t to = static_cast<std::size_t>(uni(0, static_cast<std::int64_t>(n) - 1));
      Weight w(m.dimension);
      for (auto& x : w) x = uni(-cfg.weight_bound, cfg.weight_bound);
      Rational p(0);
      if (m.states[s].owner == Owner::Random) {
        p = Rational(units[j], q);
        p.canonicalize();
      }
      m.add_edge(id++, s, to, std::move(w), p);
    }
  }
  m.initial = 0;
  m.finalize();
  return m;
}

Rational random_threshold(std::mt19937_64& rng, std::int64_t W) {
  while (true) {
    std::int64_t k = std::uniform_int_distribution<std::int64_t>(-2 * W - 2, 2 * W + 2)(rng);
    Rational r(k, 2);
    r.canonicalize();
    if (r != Rational(-W)) return r;
  }
}

namespace {

// Solves the square system; nullopt when singular.
std::optional<std::vector<Rational>> solve_square(std::vector<std::vector<Rational>> a, std::vector<Rational> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && a[p][c] == 0) ++p;
    if (p == n) return std::nullopt;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == 0) continue;
      Rational f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t r = 0; r < n; ++r) b[r] /= a[r][r];
  return b;
}

}  // namespace

VertexResult vertex_enumeration(const LinearSystem& sys) {
  const std::size_t n = sys.num_variables();
  const bool strict = sys.strict_rows() > 0;
  const std::size_t nv = n + (strict ? 1 : 0);
  struct Row {
    std::vector<Rational> a;
    Rational b;
    bool eq;
  };  // a.z >= b or a.z = b, z = (x, y)
  std::vector<Row> rows;
  for (const auto& c : sys.constraints()) {
    Row r{std::vector<Rational>(nv), c.rhs, c.rel == Relation::Eq};
    for (const auto& t : c.terms) r.a[t.var] = t.coef;
    if (c.rel == Relation::Gt) r.a[n] = -1;
    rows.push_back(r);
  }
  if (!sys.nonneg) throw std::invalid_argument("oracle handles non-negative systems only");
  for (std::size_t v = 0; v < nv; ++v) {
    Row r{std::vector<Rational>(nv), Rational(0), false};
    r.a[v] = 1;
    rows.push_back(r);
  }
  if (strict) {
    Row r{std::vector<Rational>(nv), Rational(-1), false};
    r.a[n] = -1;
    rows.push_back(r);
  }
  VertexResult res;
  std::vector<std::size_t> pick(nv);
  const std::size_t m = rows.size();
  if (nv > m) return res;
  for (std::size_t i = 0; i < nv; ++i) pick[i] = i;
  while (true) {
    std::vector<std::vector<Rational>> a;
    std::vector<Rational> b;
    for (auto i : pick) {
      a.push_back(rows[i].a);
      b.push_back(rows[i].b);
    }
    if (auto z = solve_square(a, b)) {
      bool ok = true;
      for (const auto& r : rows) {
        Rational lhs;
        for (std::size_t v = 0; v < nv; ++v) lhs += r.a[v] * (*z)[v];
        if (r.eq ? lhs != r.b : lhs < r.b) {
          ok = false;
          break;
        }
      }
      if (ok) {
        Rational y = strict ? (*z)[n] : Rational(1);
        if (!res.feasible || y > res.best_slack) res.best_slack = y;
        res.feasible = true;
      }
    }
    std::size_t i = nv;
    while (i > 0 && pick[i - 1] == m - nv + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < nv; ++j) pick[j] = pick[j - 1] + 1;
  }
  return res;
}

LinearSystem random_system(std::mt19937_64& rng, std::size_t max_vars, std::size_t max_rows) {
  auto uni = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  LinearSystem sys;
  std::size_t n = static_cast<std::size_t>(uni(1, static_cast<std::int64_t>(max_vars)));
  for (std::size_t v = 0; v < n; ++v) sys.add_variable("v" + std::to_string(v));
  std::size_t rows = static_cast<std::size_t>(uni(1, static_cast<std::int64_t>(max_rows)));
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Term> terms;
    for (std::size_t v = 0; v < n; ++v) {
      if (uni(0, 2) == 0) continue;
      Rational c(uni(-4, 4), uni(1, 3));
      c.canonicalize();
      terms.push_back({v, c});
    }
    Rational rhs(uni(-4, 4), uni(1, 2));
    rhs.canonicalize();
    auto kind = uni(0, 5);
    Relation rel = kind == 0 ? Relation::Eq : kind <= 2 ? Relation::Ge : Relation::Gt;
    if (kind == 5) sys.add_le(terms, rhs);
    else sys.add(terms, rel, rhs);
  }
  return sys;
}

std::vector<Rational> brute_force_values(const Mdp& mdp, std::size_t dim) {
  const std::size_t n = mdp.num_states();
  std::vector<std::size_t> choice(n, 0);
  auto mean_from = [&](std::size_t s) {
    std::vector<long> seen(n, -1);
    std::vector<std::int64_t> prefix{0};
    std::size_t cur = s;
    long step = 0;
    while (seen[cur] < 0) {
      seen[cur] = step++;
      const auto& e = mdp.edges[mdp.out(cur)[choice[cur]]];
      prefix.push_back(prefix.back() + e.weight[dim]);
      cur = e.to;
    }
    long start = seen[cur];
    Rational r(prefix[static_cast<std::size_t>(step)] - prefix[static_cast<std::size_t>(start)], step - start);
    r.canonicalize();
    return r;
  };
  std::vector<std::size_t> ctrl, rnd;
  for (std::size_t s = 0; s < n; ++s) (mdp.is_random(s) ? rnd : ctrl).push_back(s);
  auto advance = [&](const std::vector<std::size_t>& who) {
    for (auto s : who) {
      if (++choice[s] < mdp.out(s).size()) return true;
      choice[s] = 0;
    }
    return false;
  };
  std::vector<std::optional<Rational>> best(n);
  do {
    std::vector<std::optional<Rational>> worst(n);
    for (auto s : rnd) choice[s] = 0;
    do {
      for (std::size_t s = 0; s < n; ++s) {
        Rational v = mean_from(s);
        if (!worst[s] || v < *worst[s]) worst[s] = v;
      }
    } while (advance(rnd));
    for (std::size_t s = 0; s < n; ++s)
      if (!best[s] || *worst[s] > *best[s]) best[s] = worst[s];
  } while (advance(ctrl));
  std::vector<Rational> out;
  for (auto& b : best) out.push_back(*b);
  return out;
}

std::vector<std::vector<std::size_t>> all_end_components(const Mdp& mdp) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t n = mdp.num_states();
  for (std::size_t mask = 1; mask < (std::size_t(1) << n); ++mask) {
    std::vector<std::size_t> set;
    for (std::size_t s = 0; s < n; ++s)
      if (mask >> s & 1) set.push_back(s);
    if (!end_component_violation(mdp, set)) out.push_back(set);
  }
  return out;
}

}  // namespace oracle
