#include <doctest.h>

#include <cmath>
#include <random>

#include "mpmdp/simulate.hpp"
#include "mpmdp/verify.hpp"
#include "support.hpp"

using namespace mpmdp;

namespace {

ExplicitMachine pick(const Mdp& m, std::initializer_list<std::int64_t> edge_ids) {
  std::vector<std::size_t> choice(m.num_states(), SIZE_MAX);
  for (auto id : edge_ids) {
    auto e = m.edge_index(id);
    choice[m.edges[e].from] = e;
  }
  return memoryless(m, choice);
}

// Random pure memoryless choice for every controller state.
ExplicitMachine random_choice(const Mdp& m, std::mt19937_64& rng) {
  std::vector<std::size_t> choice(m.num_states(), SIZE_MAX);
  for (std::size_t s = 0; s < m.num_states(); ++s)
    if (!m.is_random(s)) choice[s] = m.out(s)[rng() % m.out(s).size()];
  return memoryless(m, choice);
}

}  // namespace

TEST_CASE("deterministic trajectories give exact empirical means") {
  auto run = fixture("RUN_EX");
  SimOptions opt;
  opt.runs = 5;
  opt.horizon = 1000;
  opt.mu = std::vector<Rational>{0, 0};
  auto r = simulate(run, pick(run, {0, 2}), run.state_index("t"), opt);
  CHECK(r.mean == std::vector<double>{5, 15});
  CHECK(r.min == std::vector<double>{5, 15});
  CHECK(r.max == std::vector<double>{5, 15});
  CHECK(*r.exceed_fraction == 1.0);
  CHECK(r.to_json()["approximate"] == true);
}

TEST_CASE("simulation is a pure function of the seed") {
  auto run = fixture("RUN_EX_BAS");
  auto d = decide(run, {Mode::Bas, "s", {0, 0}, {Rational(99, 10), Rational(99, 10)}});
  auto syn = bas_strategy(d);
  REQUIRE(syn.ok);
  SimOptions opt;
  opt.runs = 50;
  opt.horizon = 500;
  opt.seed = 17;
  auto a = simulate(d.working, *syn.strategy, d.start, opt).to_json();
  auto b = simulate(d.working, *syn.strategy, d.start, opt).to_json();
  CHECK(a.dump() == b.dump());
  opt.seed = 18;
  CHECK(simulate(d.working, *syn.strategy, d.start, opt).to_json().dump() != a.dump());
  CHECK(run_seed(1, 0) != run_seed(0, 1));
}

TEST_CASE("Monte Carlo means agree with exact expectations") {
  struct Case {
    Mdp mdp;
    ExplicitMachine machine;
    std::size_t start;
  };
  std::vector<Case> cases;
  auto bas = fixture("RUN_EX_BAS");
  auto d = decide(bas, {Mode::Bas, "s", {0, 0}, {Rational(99, 10), Rational(99, 10)}});
  auto syn = bas_strategy(d);
  REQUIRE(syn.ok);
  cases.push_back({bas, export_machine(d, *syn.strategy, bas), bas.state_index("s")});
  std::mt19937_64 rng(77);
  while (cases.size() < 4) {
    auto m = oracle::random_mdp(rng);
    cases.push_back({m, random_choice(m, rng), 0});
  }

  int tested = 0, inside = 0;
  for (const auto& c : cases) {
    auto exact = expected_mp(induced_chain(c.mdp, c.machine, c.start));
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      SimOptions opt;
      opt.runs = 100;
      opt.horizon = 10000;
      opt.seed = seed;
      auto r = simulate(c.mdp, c.machine, c.start, opt);
      bool ok = true;
      for (std::size_t i = 0; i < c.mdp.dimension; ++i) {
        double se = r.stddev[i] / std::sqrt(static_cast<double>(opt.runs));
        // finite-horizon transients add O(1/horizon) on top of the sampling error
        ok = ok && std::abs(r.mean[i] - exact[i].get_d()) <= 3 * se + 1e-2;
      }
      ++tested;
      inside += ok;
    }
  }
  CHECK(inside >= 0.99 * tested);
}

TEST_CASE("f_K monitor invariants along simulated plays") {
  auto run = fixture("RUN_EX");
  auto d = decide(run, {Mode::BwcInf, "s", {0, 0}, {Rational(99, 10), Rational(99, 10)}});
  auto syn = bwc_infinite_strategy(d, 16);
  REQUIRE(syn.ok);
  FkRunner runner(*syn.strategy);
  const std::int64_t K = syn.strategy->K;
  int switches = 0, phase_reached = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    runner.reset(seed);
    for (int t = 0; t < 3000; ++t) {
      auto before = runner.monitor();
      runner.step();
      const auto& after = runner.monitor();
      if (before.mode == FkRunner::Mode::Expectation && after.mode == FkRunner::Mode::WorstCase) {
        ++switches;
        // in phase 0 only the end-of-phase check may fire
        if (before.phase == 0) CHECK(before.step_in_phase + 1 == K);
        CHECK(after.switched);
      }
      if (after.mode == FkRunner::Mode::Expectation) {
        CHECK(runner.above_bound());
        phase_reached = std::max<int>(phase_reached, static_cast<int>(after.phase));
      }
      CHECK(!(before.mode == FkRunner::Mode::WorstCase && after.mode != FkRunner::Mode::WorstCase));
    }
  }
  CHECK(phase_reached >= 2);
  MESSAGE("switches to the worst-case machine: " << switches);

  SimOptions opt;
  opt.runs = 100;
  opt.horizon = 2000;
  auto rep = simulate(*syn.strategy, opt);
  CHECK(rep.monitor_violations == 0);

  // Reloaded records run on the original weights through the stored map.
  auto back = infinite_from_json(run, syn.strategy->to_json());
  auto rep2 = simulate(back, opt);
  CHECK(rep2.monitor_violations == 0);
  CHECK(rep2.to_json().dump() == rep.to_json().dump());
}

TEST_CASE("replaying worst-case witness cycles reproduces the violation") {
  std::mt19937_64 rng(555);
  int witnesses = 0;
  for (int it = 0; it < 200; ++it) {
    auto m = oracle::random_mdp(rng);
    auto f = random_choice(m, rng);
    std::vector<Rational> mu;
    for (std::size_t i = 0; i < m.dimension; ++i) mu.push_back(oracle::random_threshold(rng, m.max_abs_weight()));
    auto chain = induced_chain(m, f, 0);
    auto rep = verify_worstcase(chain, mu);
    if (rep.ok) continue;
    ++witnesses;
    REQUIRE(rep.dimension);
    const std::size_t i = *rep.dimension;
    // Loop the cycle many times after the prefix; the running mean tends to the cycle mean.
    std::int64_t cycle_sum = 0;
    for (const auto& st : rep.cycle) cycle_sum += m.edges[st.edge].weight[i];
    Rational cycle_mean(cycle_sum, static_cast<long>(rep.cycle.size()));
    cycle_mean.canonicalize();
    CHECK(cycle_mean == rep.cycle_mean[i]);
    CHECK(cycle_mean <= mu[i]);
    for (std::size_t k = 0; k < rep.cycle.size(); ++k) {
      auto next = rep.cycle[(k + 1) % rep.cycle.size()].node;
      bool linked = false;
      for (const auto& ce : chain.out[rep.cycle[k].node]) linked = linked || (ce.to == next && ce.edge == rep.cycle[k].edge);
      CHECK(linked);
    }
  }
  CHECK(witnesses > 20);
}
