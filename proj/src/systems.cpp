#include "mpmdp/systems.hpp"

#include <algorithm>

namespace mpmdp {

ThresholdSystem build_flow_system(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                                  const std::vector<EndComponent>& components, const Dims& c3_dims) {
  if (mdp.is_random(s0)) throw ModelError("flow system needs a controller start state");
  ThresholdSystem t;
  auto& lp = t.lp;
  const std::size_t n = mdp.num_states(), m = mdp.num_edges();
  for (std::size_t s = 0; s < n; ++s) t.y_state.push_back(lp.add_variable("y_s[" + mdp.states[s].id + "]"));
  for (std::size_t e = 0; e < m; ++e) t.y_edge.push_back(lp.add_variable("y_e[" + std::to_string(mdp.edges[e].id) + "]"));
  for (std::size_t e = 0; e < m; ++e) t.x_edge.push_back(lp.add_variable("x_e[" + std::to_string(mdp.edges[e].id) + "]"));

  // (A1) inflow = outflow + switching mass; (A1') random split of the non-switching mass
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<Term> row;
    for (auto e : mdp.in(s)) row.push_back({t.y_edge[e], Rational(1)});
    for (auto e : mdp.out(s)) row.push_back({t.y_edge[e], Rational(-1)});
    row.push_back({t.y_state[s], Rational(-1)});
    lp.add(row, Relation::Eq, Rational(s == s0 ? -1 : 0), "A1[" + mdp.states[s].id + "]");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!mdp.is_random(s)) continue;
    for (auto e : mdp.out(s)) {
      const Rational& p = mdp.edges[e].prob;
      std::vector<Term> row{{t.y_edge[e], Rational(1)}, {t.y_state[s], p}};
      for (auto f : mdp.in(s)) row.push_back({t.y_edge[f], Rational(-p)});
      lp.add(row, Relation::Eq, Rational(0), "A1'[" + std::to_string(mdp.edges[e].id) + "]");
    }
  }
  // (A2) all switching happens inside the components
  {
    std::vector<Term> row;
    for (const auto& c : components)
      for (auto s : c.states) row.push_back({t.y_state[s], Rational(1)});
    lp.add(row, Relation::Eq, Rational(1), "A2");
  }
  std::vector<bool> inside(m, false);
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    std::vector<Term> row;
    for (auto s : c.states) row.push_back({t.y_state[s], Rational(1)});
    for (auto e : c.edges) {
      row.push_back({t.x_edge[e], Rational(-1)});
      inside[e] = true;
    }
    lp.add(row, Relation::Eq, Rational(0), "B[" + std::to_string(k) + "]");
  }
  // Frequencies live on component edges only; elsewhere they would be unconstrained circulations.
  for (std::size_t e = 0; e < m; ++e)
    if (!inside[e]) lp.add({{t.x_edge[e], Rational(1)}}, Relation::Eq, Rational(0), "X0[" + std::to_string(mdp.edges[e].id) + "]");
  // (C1) conservation, (C1') random split
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<Term> row;
    for (auto e : mdp.in(s)) row.push_back({t.x_edge[e], Rational(1)});
    for (auto e : mdp.out(s)) row.push_back({t.x_edge[e], Rational(-1)});
    lp.add(row, Relation::Eq, Rational(0), "C1[" + mdp.states[s].id + "]");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!mdp.is_random(s)) continue;
    for (auto e : mdp.out(s)) {
      const Rational& p = mdp.edges[e].prob;
      std::vector<Term> row{{t.x_edge[e], Rational(1)}};
      for (auto f : mdp.in(s)) row.push_back({t.x_edge[f], Rational(-p)});
      lp.add(row, Relation::Eq, Rational(0), "C1'[" + std::to_string(mdp.edges[e].id) + "]");
    }
  }
  // (C2) global expectation, (C3) local expectation inside every component
  for (std::size_t i = 0; i < mdp.dimension; ++i) {
    std::vector<Term> row;
    for (std::size_t e = 0; e < m; ++e) row.push_back({t.x_edge[e], Rational(mdp.edges[e].weight[i])});
    lp.add(row, Relation::Gt, nu[i], "C2[" + std::to_string(i) + "]");
  }
  for (std::size_t k = 0; k < components.size(); ++k)
    for (auto i : c3_dims) {
      std::vector<Term> row;
      for (auto e : components[k].edges) row.push_back({t.x_edge[e], Rational(mdp.edges[e].weight[i])});
      lp.add(row, Relation::Gt, Rational(0), "C3[" + std::to_string(k) + "," + std::to_string(i) + "]");
    }
  return t;
}

ThresholdSystem build_T(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                        const std::vector<EndComponent>& mwecs, const Dims& dims) {
  return build_flow_system(mdp, s0, nu, mwecs, dims);
}

ThresholdSystem build_Tprime(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                             const std::vector<EndComponent>& mecs, const Dims& dims) {
  return build_flow_system(mdp, s0, nu, mecs, dims);
}

EcSystem build_ec_expectation(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<Rational>& nu,
                              bool strict, const Dims& dims) {
  EcSystem sys;
  sys.states = ec;
  std::sort(sys.states.begin(), sys.states.end());
  sys.edges = internal_edges(mdp, sys.states);
  auto& lp = sys.lp;
  std::vector<long> xs(mdp.num_states(), -1);
  for (auto s : sys.states) {
    sys.x_state.push_back(lp.add_variable("x_s[" + mdp.states[s].id + "]"));
    xs[s] = static_cast<long>(sys.x_state.back());
  }
  std::vector<long> xe(mdp.num_edges(), -1);
  for (auto e : sys.edges) {
    sys.x_edge.push_back(lp.add_variable("x_e[" + std::to_string(mdp.edges[e].id) + "]"));
    xe[e] = static_cast<long>(sys.x_edge.back());
  }
  {
    std::vector<Term> row;
    for (auto v : sys.x_state) row.push_back({v, Rational(1)});
    lp.add(row, Relation::Eq, Rational(1), "EC-1");
  }
  for (auto s : sys.states) {
    std::vector<Term> in{{static_cast<std::size_t>(xs[s]), Rational(-1)}}, out = in;
    for (auto e : mdp.in(s))
      if (xe[e] >= 0) in.push_back({static_cast<std::size_t>(xe[e]), Rational(1)});
    for (auto e : mdp.out(s))
      if (xe[e] >= 0) out.push_back({static_cast<std::size_t>(xe[e]), Rational(1)});
    lp.add(in, Relation::Eq, Rational(0), "EC-IN[" + mdp.states[s].id + "]");
    lp.add(out, Relation::Eq, Rational(0), "EC-OUT[" + mdp.states[s].id + "]");
    if (mdp.is_random(s))
      for (auto e : mdp.out(s)) {
        if (xe[e] < 0) continue;
        lp.add({{static_cast<std::size_t>(xe[e]), Rational(1)}, {static_cast<std::size_t>(xs[s]), Rational(-mdp.edges[e].prob)}},
               Relation::Eq, Rational(0), "EC-RAND[" + std::to_string(mdp.edges[e].id) + "]");
      }
  }
  for (auto i : dims) {
    std::vector<Term> row;
    for (std::size_t k = 0; k < sys.edges.size(); ++k) row.push_back({sys.x_edge[k], Rational(mdp.edges[sys.edges[k]].weight[i])});
    lp.add(row, strict ? Relation::Gt : Relation::Ge, nu[i], "EC-MP[" + std::to_string(i) + "]");
  }
  return sys;
}

std::vector<EndComponent> useful_mecs(const Mdp& mdp, const Dims& dims) {
  std::vector<EndComponent> out;
  std::vector<Rational> zero(mdp.dimension, Rational(0));
  for (auto& m : mecs(mdp)) {
    if (dims.empty() || solve(build_ec_expectation(mdp, m.states, zero, true, dims).lp).strictly_feasible())
      out.push_back(std::move(m));
  }
  return out;
}

json Decision::to_json() const {
  json j;
  j["answer"] = answer;
  j["mode"] = mpmdp::to_string(mode);
  json triv = json::array();
  for (std::size_t i = 0; i < trivial.size(); ++i)
    if (trivial[i]) triv.push_back(i);
  j["trivial_dimensions"] = triv;
  if (!answer) j["failure"] = stage;
  if (lp) {
    j["lp_status"] = mpmdp::to_string(lp->status);
    if (lp->slack) j["slack"] = rational_json(*lp->slack);
  }
  if (answer) {
    json w;
    if (system && lp) {
      json a = json::object();
      auto x = lp->witness();
      for (std::size_t v = 0; v < x.size(); ++v)
        if (x[v] != 0) a[system->lp.variables()[v]] = rational_json(x[v]);
      w["assignment"] = a;
    }
    json dec = json::array();
    for (const auto& c : components) dec.push_back(state_ids(working, c.states));
    w["decomposition"] = dec;
    if (region) w["winning_region"] = state_ids(normalized.mdp, region->states());
    j["witness"] = w;
  } else if (!components.empty()) {
    json dec = json::array();
    for (const auto& c : components) dec.push_back(state_ids(working, c.states));
    j["decomposition"] = dec;
  }
  return j;
}

Decision decide(const Mdp& mdp, const ThresholdQuery& q, const DecideOptions& opt) {
  require_valid(mdp, q);
  Decision d;
  d.mode = q.mode;
  d.normalized = normalize(mdp, q);
  const Mdp& nm = d.normalized.mdp;
  const bool worst = q.mode == Mode::Wc || q.mode == Mode::BwcFin || q.mode == Mode::BwcInf;
  d.trivial = worst ? detect_trivial(q.mu, mdp.max_abs_weight()) : std::vector<bool>(mdp.dimension, false);
  d.dims = active_dimensions(d.trivial);
  const std::size_t s0 = nm.state_index(q.from);

  if (q.mode == Mode::Wc) {
    d.region = wc_winning_region(nm, d.dims, opt.wc);
    d.answer = d.region->winning[s0];
    d.stage = "winning-region";
    return d;
  }
  if (worst) {
    auto pr = prune(nm, s0, d.dims, opt.wc);
    if (!pr) {
      d.stage = "pruned";
      return d;
    }
    d.region = std::move(pr->region);
    d.working = std::move(pr->mdp);
  } else {
    d.working = induce(nm, reachable(nm, s0));
  }
  d.start = d.working.state_index(q.from);
  if (d.working.is_random(d.start)) {
    std::string id = "pre";
    while (d.working.find_state(id)) id += "'";
    std::int64_t eid = 0;
    for (const auto& e : d.working.edges) eid = std::max(eid, e.id + 1);
    auto pre = d.working.add_state(id, Owner::Controller);
    d.working.add_edge(eid, pre, d.start, Weight(mdp.dimension, 0));
    d.working.finalize();
    d.prestate = id;
    d.start = pre;
  }

  Dims c3;
  switch (q.mode) {
    case Mode::BwcFin:
      d.components = mwecs(d.working, d.dims, opt.wc);
      c3 = d.dims;
      break;
    case Mode::BwcInf:
      d.components = useful_mecs(d.working, d.dims);
      c3 = d.dims;
      break;
    case Mode::Bas:
      c3 = all_dimensions(mdp.dimension);
      d.components = useful_mecs(d.working, c3);
      break;
    default:
      d.components = mecs(d.working);
      break;
  }
  if (d.components.empty()) {
    d.stage = "no-component";
    return d;
  }
  d.system = build_flow_system(d.working, d.start, d.normalized.query.nu, d.components, c3);
  d.lp = solve(d.system->lp);
  d.answer = d.lp->strictly_feasible();
  d.stage = "system";
  return d;
}

}  // namespace mpmdp
