#include <doctest.h>

#include "mpmdp/systems.hpp"
#include "support.hpp"

using namespace mpmdp;

namespace {

std::vector<Rational> point(const ThresholdSystem& t, const Mdp& m,
                            std::initializer_list<std::pair<std::string, Rational>> ys,
                            std::initializer_list<std::pair<std::int64_t, Rational>> yes,
                            std::initializer_list<std::pair<std::int64_t, Rational>> xes) {
  std::vector<Rational> x(t.lp.num_variables());
  for (auto& [s, v] : ys) x[t.y_state[m.state_index(s)]] = v;
  for (auto& [e, v] : yes) x[t.y_edge[m.edge_index(e)]] = v;
  for (auto& [e, v] : xes) x[t.x_edge[m.edge_index(e)]] = v;
  return x;
}

bool answer(const std::string& fx, Mode mode, std::vector<Rational> nu, std::vector<Rational> mu = {0, 0}) {
  return decide(fixture(fx), {mode, "s", std::move(mu), std::move(nu)}).answer;
}

}  // namespace

TEST_CASE("system T on the running example") {
  auto run = fixture("RUN_EX");
  auto dims = all_dimensions(2);
  auto mw = mwecs(run, dims);
  auto s = run.state_index("s");
  auto t = build_T(run, s, {0, 9}, mw, dims);
  CHECK(t.lp.num_variables() == 4 + 7 + 7);
  auto x = point(t, run, {{"t", 1}}, {{0, 1}}, {{2, 1}});
  auto res = check_assignment(t.lp, x);
  CHECK(res.ok);
  CHECK(solve(t.lp).strictly_feasible());

  auto t99 = build_T(run, s, {9, 9}, mw, dims);
  CHECK(!solve(t99.lp).strictly_feasible());
}

TEST_CASE("system T' on the running example") {
  auto run = fixture("RUN_EX");
  auto dims = all_dimensions(2);
  auto ms = mecs(run);
  auto s = run.state_index("s");
  auto t = build_Tprime(run, s, {Rational(99, 10), Rational(99, 10)}, ms, dims);
  Rational h(1, 2), q(1, 4), e(1, 8);
  auto x = point(t, run, {{"t", h}, {"u", h}}, {{0, h}, {1, h}}, {{2, h}, {4, q}, {5, e}, {6, e}});
  CHECK(check_assignment(t.lp, x).ok);
  CHECK(solve(t.lp).strictly_feasible());
  CHECK(!solve(build_Tprime(run, s, {10, 10}, ms, dims).lp).strictly_feasible());
  CHECK(solve(build_Tprime(run, s, {0, 9}, ms, dims).lp).strictly_feasible());
}

TEST_CASE("expectation system inside an end component") {
  auto run = fixture("RUN_EX");
  auto dims = all_dimensions(2);
  auto t = run.state_index("t");
  auto u = run.state_index("u"), v = run.state_index("v");
  auto st = build_ec_expectation(run, {t}, {5, 15}, false, dims);
  auto o = solve(st.lp);
  REQUIRE(o.status == LpOutcome::Status::Feasible);
  CHECK(o.assignment[st.x_state[0]] == 1);
  CHECK(o.assignment[st.x_edge[0]] == 1);
  auto uv = build_ec_expectation(run, {u, v}, {15, 5}, false, dims);
  auto ou = solve(uv.lp);
  REQUIRE(ou.status == LpOutcome::Status::Feasible);
  for (std::size_t k = 0; k < uv.edges.size(); ++k) {
    Rational want = run.edges[uv.edges[k]].from == u ? Rational(1, 2) : Rational(1, 4);
    CHECK(ou.assignment[uv.x_edge[k]] == want);
  }
  CHECK(solve(build_ec_expectation(run, {t}, {6, 0}, false, dims).lp).status == LpOutcome::Status::Infeasible);
}

TEST_CASE("decision table of the running examples") {
  CHECK(answer("RUN_EX", Mode::BwcFin, {0, 9}));
  CHECK(!answer("RUN_EX", Mode::BwcFin, {9, 9}));
  CHECK(answer("RUN_EX", Mode::BwcInf, {Rational(99, 10), Rational(99, 10)}));
  CHECK(!answer("RUN_EX", Mode::BwcInf, {10, 10}));
  CHECK(answer("RUN_EX_BAS", Mode::Bas, {Rational(99, 10), Rational(99, 10)}));
  CHECK(!answer("RUN_EX_BAS", Mode::BwcInf, {6, 6}));
  CHECK(answer("RUN_EX_BAS", Mode::BwcInf, {4, 14}));
  CHECK(answer("RUN_EX", Mode::Wc, {0, 0}));
  CHECK(!decide(fixture("RUN_EX_BAS"), {Mode::BwcFin, "u", {0, 0}, {0, 0}}).answer);
  CHECK(decide(fixture("RUN_EX_BAS"), {Mode::BwcFin, "u", {0, 0}, {0, 0}}).stage == "pruned");
}

TEST_CASE("random start states get a controller pre-state") {
  auto run = fixture("RUN_EX");
  auto d = decide(run, {Mode::Exp, "v", {0, 0}, {Rational(14), Rational(4)}});
  CHECK(d.answer);
  REQUIRE(d.prestate);
  CHECK(!d.working.is_random(d.start));
}

TEST_CASE("decisions reject malformed queries") {
  auto run = fixture("RUN_EX");
  CHECK_THROWS_AS(decide(run, {Mode::Bas, "nowhere", {0, 0}, {0, 0}}), ModelError);
  CHECK_THROWS_AS(decide(run, {Mode::Bas, "s", {0}, {0, 0}}), ModelError);
}

TEST_CASE("implication chain, monotonicity and normalize invariance on random instances") {
  auto rep = oracle::decision_properties(2718, 220);
  for (const auto& f : rep.failures) MESSAGE(f);
  CHECK(rep.instances == 220);
  CHECK(rep.violations() == 0);
  // the corpus exercises both answers of every mode
  for (int k = 0; k < 5; ++k) {
    CHECK(rep.yes_counts[k] > 0);
    CHECK(rep.yes_counts[k] < rep.instances);
  }
}
