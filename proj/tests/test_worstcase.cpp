#include <doctest.h>

#include <algorithm>

#include "mpmdp/worstcase.hpp"
#include "support.hpp"

using namespace mpmdp;

namespace {

std::vector<std::string> ids(const Mdp& m, const std::vector<std::size_t>& s) { return state_ids(m, s); }

Mdp project(const Mdp& m, std::size_t dim) {
  Mdp p = m;
  p.dimension = 1;
  for (auto& e : p.edges) e.weight = {e.weight[dim]};
  p.finalize();
  return p;
}

Mdp single_loop(std::int64_t w) {
  Mdp m;
  m.dimension = 1;
  m.add_state("a", Owner::Controller);
  m.add_edge(0, 0, 0, {w});
  m.finalize();
  return m;
}

}  // namespace

TEST_CASE("positive multicycle slack") {
  auto run = fixture("RUN_EX");
  auto d2 = all_dimensions(2);
  CHECK(*positive_multicycle(run, internal_edges(run, {run.state_index("t")}), d2) == 5);
  std::vector<std::size_t> forced{run.edge_index(4), run.edge_index(6)};
  CHECK(*positive_multicycle(run, forced, d2) == -30);
  auto approx = fixture("APPROX_EX");
  CHECK(*positive_multicycle(approx, internal_edges(approx, {0, 1}), d2) == Rational(1, 2));
  CHECK(!positive_multicycle(run, {}, d2));
}

TEST_CASE("winning regions of the fixtures") {
  auto d2 = all_dimensions(2);
  auto run = fixture("RUN_EX");
  CHECK(wc_winning_region(run, d2).states().size() == 4);
  auto bas = fixture("RUN_EX_BAS");
  auto r = wc_winning_region(bas, d2);
  CHECK(ids(bas, r.states()) == std::vector<std::string>{"s", "t"});
  for (auto s : {bas.state_index("u"), bas.state_index("v")}) {
    REQUIRE(r.certificate[s]);
    auto w = one_player_winning(bas, *r.certificate[s], d2);
    CHECK(!w[s]);
  }
  auto loop = single_loop(-1);
  CHECK(wc_winning_region(loop, {0}).states().empty());
}

TEST_CASE("unidimensional values") {
  auto run = fixture("RUN_EX");
  auto r0 = project(run, 0);
  auto v0 = wc_value_unidim(r0, 0);
  CHECK(v0[r0.state_index("t")] == 5);
  for (auto st : {"s", "u", "v"}) CHECK(v0[r0.state_index(st)] == 15);
  auto bas = project(fixture("RUN_EX_BAS"), 1);
  auto vals = wc_value_unidim(bas, 0);
  CHECK(vals[bas.state_index("s")] == 15);
  CHECK(vals[bas.state_index("t")] == 15);
  CHECK(vals[bas.state_index("u")] == -30);
  CHECK(vals[bas.state_index("v")] == -30);
  CHECK(wc_value_unidim(single_loop(7), 0)[0] == 7);
}

TEST_CASE("winning regions and values agree with memoryless max-min") {
  std::mt19937_64 rng(5);
  oracle::RandomMdpConfig cfg;
  cfg.max_states = 5;
  cfg.fixed_dim = 1;
  cfg.random_share = 0.45;
  for (int it = 0; it < 150; ++it) {
    auto m = oracle::random_mdp(rng, cfg);
    auto ref = oracle::brute_force_values(m, 0);
    CHECK(wc_value_unidim(m, 0) == ref);
    auto region = wc_winning_region(m, {0});
    WcOptions no_fast;
    // the multidimensional enumeration path on a single dimension
    Mdp twin = m;
    twin.dimension = 2;
    for (auto& e : twin.edges) e.weight = {e.weight[0], e.weight[0]};
    twin.finalize();
    auto region2 = wc_winning_region(twin, {0, 1}, no_fast);
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      CHECK(region.winning[s] == (ref[s] > 0));
      CHECK(region2.winning[s] == (ref[s] > 0));
      if (!region.winning[s]) {
        REQUIRE(region.certificate[s]);
        CHECK(!one_player_winning(m, *region.certificate[s], {0})[s]);
      }
    }
  }
}

TEST_CASE("winning region safety closure and monotonicity") {
  std::mt19937_64 rng(77);
  for (int it = 0; it < 60; ++it) {
    auto m = oracle::random_mdp(rng);
    auto dims = all_dimensions(m.dimension);
    auto r = wc_winning_region(m, dims);
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      if (!r.winning[s]) continue;
      bool any = false, all = true;
      for (auto e : m.out(s)) {
        any = any || r.winning[m.edges[e].to];
        all = all && r.winning[m.edges[e].to];
      }
      CHECK((m.is_random(s) ? all : any));
    }
    // an extra controller edge never shrinks the region
    std::size_t c = 0;
    while (c < m.num_states() && m.is_random(c)) ++c;
    if (c == m.num_states()) continue;
    Mdp more = m;
    Weight w(m.dimension);
    for (auto& x : w) x = static_cast<std::int64_t>(rng() % 7) - 3;
    more.add_edge(1000, c, static_cast<std::size_t>(rng() % m.num_states()), w);
    more.finalize();
    auto r2 = wc_winning_region(more, dims);
    for (std::size_t s = 0; s < m.num_states(); ++s)
      if (r.winning[s]) CHECK(r2.winning[s]);
  }
}

TEST_CASE("maximal winning end components") {
  auto d2 = all_dimensions(2);
  auto run = fixture("RUN_EX");
  auto mw = mwecs(run, d2);
  REQUIRE(mw.size() == 1);
  CHECK(ids(run, mw[0].states) == std::vector<std::string>{"t"});
  auto bas = fixture("RUN_EX_BAS");
  auto mb = mwecs(bas, d2);
  REQUIRE(mb.size() == 1);
  CHECK(ids(bas, mb[0].states) == std::vector<std::string>{"t"});

  std::mt19937_64 rng(31);
  for (int it = 0; it < 60; ++it) {
    auto m = oracle::random_mdp(rng);
    auto dims = all_dimensions(m.dimension);
    auto found = mwecs(m, dims);
    std::vector<int> owner(m.num_states(), 0);
    for (const auto& u : found) {
      CHECK(!end_component_violation(m, u.states));
      CHECK(wc_winning_region(restrict_to(m, u.states), dims).states().size() == u.states.size());
      for (auto s : u.states) CHECK(owner[s]++ == 0);
    }
    for (const auto& ec : oracle::all_end_components(m)) {
      if (wc_winning_region(restrict_to(m, ec), dims).states().size() != ec.size()) continue;
      bool covered = std::any_of(found.begin(), found.end(), [&](const EndComponent& u) {
        return std::includes(u.states.begin(), u.states.end(), ec.begin(), ec.end());
      });
      CHECK(covered);
    }
  }
}

TEST_CASE("pruning") {
  auto d2 = all_dimensions(2);
  auto run = fixture("RUN_EX");
  auto p = prune(run, run.state_index("s"), d2);
  REQUIRE(p);
  CHECK(p->mdp.num_states() == 4);
  auto bas = fixture("RUN_EX_BAS");
  auto pb = prune(bas, bas.state_index("s"), d2);
  REQUIRE(pb);
  CHECK(state_ids(pb->mdp, {0, 1}) == std::vector<std::string>{"s", "t"});
  CHECK(pb->mdp.num_edges() == 2);
  CHECK(validate(pb->mdp).empty());
  CHECK(!prune(bas, bas.state_index("u"), d2));
}

TEST_CASE("task system MWEC with the trivial energy dimension") {
  auto task = fixture("TASK_EX");
  for (auto& e : task.edges)
    for (auto& x : e.weight) x = -x;
  task.finalize();
  ThresholdQuery q{Mode::BwcFin, "0", {Rational(-49, 4), Rational(-64)}, {Rational(-49, 4), Rational(-29, 4)}};
  auto n = normalize(task, q);
  auto dims = active_dimensions(detect_trivial(q.mu, task.max_abs_weight()));
  CHECK(dims == Dims{0});
  auto mw = mwecs(n.mdp, dims);
  REQUIRE(mw.size() == 1);
  CHECK(mw[0].states.size() == 6);
}
