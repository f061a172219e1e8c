#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mpmdp/io.hpp"
#include "mpmdp/simulate.hpp"
#include "mpmdp/synthesis.hpp"
#include "mpmdp/verify.hpp"

using namespace mpmdp;

namespace {

// Answer-bearing subcommands map yes/no onto exit codes 0/1; anything thrown is 2.
enum Exit { kYes = 0, kNo = 1, kError = 2 };

struct Config {
  std::string mdp_path, mode, from, mu, nu, out, strategy, check, kind, dump_lp;
  std::size_t runs = 1000, horizon = 10000;
  std::uint64_t seed = 0;
  std::size_t adversary_cap = std::size_t(1) << 20;
  std::int64_t max_N = std::int64_t(1) << 16;
  std::int64_t K = 0;
  int verbose = 0;
};

std::vector<Rational> parse_vector(const std::string& text) {
  std::vector<Rational> v;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) v.push_back(parse_rational(item));
  if (v.empty()) throw ModelError("empty threshold vector");
  return v;
}

std::vector<Rational> vector_from(const json& j) {
  std::vector<Rational> v;
  for (const auto& x : j) v.push_back(rational_from_json(x));
  return v;
}

Mdp load_mdp(const Config& c) {
  Mdp m = mdp_from_json(read_json_file(c.mdp_path));
  require_valid(m);
  return m;
}

void emit(const json& j, const std::string& path = {}) {
  std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(path);
    if (!f) throw ModelError("cannot write " + path);
    f << text;
  }
}

void notes(const Config& c, const std::vector<std::string>& lines) {
  if (c.verbose)
    for (const auto& l : lines) std::cerr << l << "\n";
}

ThresholdQuery query_of(const Config& c, const Mdp& m) {
  ThresholdQuery q;
  q.mode = parse_mode(c.mode);
  q.from = c.from;
  std::vector<Rational> zeros(m.dimension, Rational(0));
  // mu plays no role for exp and nu none for wc; the other flag is mandatory.
  if (c.mu.empty() && q.mode != Mode::Exp) throw ModelError("--mu is required for mode " + c.mode);
  if (c.nu.empty() && q.mode != Mode::Wc) throw ModelError("--nu is required for mode " + c.mode);
  q.mu = c.mu.empty() ? zeros : parse_vector(c.mu);
  q.nu = c.nu.empty() ? zeros : parse_vector(c.nu);
  require_valid(m, q);
  return q;
}

// Worst-case normalization used by decompose --kind mwec and prune.
Normalized wc_normalized(const Config& c, const Mdp& m, Dims& dims) {
  std::vector<Rational> mu = c.mu.empty() ? std::vector<Rational>(m.dimension, Rational(0)) : parse_vector(c.mu);
  ThresholdQuery q{Mode::Wc, c.from.empty() ? m.states.at(0).id : c.from, mu, std::vector<Rational>(m.dimension)};
  require_valid(m, q);
  dims = active_dimensions(detect_trivial(mu, m.max_abs_weight()));
  return normalize(m, q);
}

std::vector<Rational> denormalize(const std::vector<Rational>& v, const Normalization& map) {
  std::vector<Rational> r;
  for (std::size_t i = 0; i < v.size(); ++i) r.push_back((v[i] + Rational(map.shift[i])) / Rational(map.scale[i]));
  return r;
}

int cmd_validate(const Config& c) {
  Mdp m = mdp_from_json(read_json_file(c.mdp_path));
  auto problems = validate(m);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << p << "\n";
    return kError;
  }
  emit({{"valid", true}, {"states", m.num_states()}, {"edges", m.num_edges()}});
  return kYes;
}

int cmd_info(const Config& c) {
  Mdp m = load_mdp(c);
  std::size_t random = 0;
  for (std::size_t s = 0; s < m.num_states(); ++s) random += m.is_random(s);
  emit({{"dimension", m.dimension},
        {"W", m.max_abs_weight()},
        {"Q", m.max_prob_denominator().get_str()},
        {"states", m.num_states()},
        {"controller_states", m.num_states() - random},
        {"random_states", random},
        {"edges", m.num_edges()}});
  return kYes;
}

int cmd_decompose(const Config& c) {
  Mdp m = load_mdp(c);
  json parts = json::array();
  if (c.kind == "scc") {
    for (const auto& comp : sccs(m)) parts.push_back({{"states", state_ids(m, comp.nodes)}, {"trivial", comp.trivial}});
  } else if (c.kind == "mec") {
    for (const auto& ec : mecs(m)) parts.push_back({{"states", state_ids(m, ec.states)}});
  } else {
    Dims dims;
    Normalized n = wc_normalized(c, m, dims);
    WcOptions wo;
    wo.adversary_cap = c.adversary_cap;
    for (const auto& ec : mwecs(n.mdp, dims, wo)) parts.push_back({{"states", state_ids(m, ec.states)}});
  }
  emit({{"kind", c.kind}, {"components", parts}});
  return kYes;
}

int cmd_prune(const Config& c) {
  Mdp m = load_mdp(c);
  Dims dims;
  Normalized n = wc_normalized(c, m, dims);
  WcOptions wo;
  wo.adversary_cap = c.adversary_cap;
  auto p = prune(n.mdp, n.mdp.state_index(c.from), dims, wo);
  json j{{"from", c.from}, {"winning", p.has_value()}};
  if (p) {
    std::vector<std::string> ids;
    for (const auto& s : p->mdp.states) ids.push_back(s.id);
    j["states"] = ids;
    j["winning_region"] = state_ids(n.mdp, p->region.states());
  }
  emit(j);
  return p ? kYes : kNo;
}

Decision run_decide(const Config& c, const Mdp& m) {
  DecideOptions opt;
  opt.wc.adversary_cap = c.adversary_cap;
  return decide(m, query_of(c, m), opt);
}

int cmd_decide(const Config& c) {
  Mdp m = load_mdp(c);
  Decision d = run_decide(c, m);
  if (!c.dump_lp.empty()) {
    std::ofstream f(c.dump_lp);
    if (!f) throw ModelError("cannot write " + c.dump_lp);
    if (d.system)
      f << d.system->lp.dump();
    else
      std::cerr << "no linear system was built (stage " << d.stage << ")\n";
  }
  emit(d.to_json());
  return d.answer ? kYes : kNo;
}

json query_json(const Config& c, const Mdp& m) {
  auto q = query_of(c, m);
  return {{"mode", to_string(q.mode)}, {"from", q.from}, {"mu", vector_json(q.mu)}, {"nu", vector_json(q.nu)}};
}

int cmd_synthesize(const Config& c) {
  Mdp m = load_mdp(c);
  Decision d = run_decide(c, m);
  if (!d.answer) {
    std::cerr << "no strategy: the threshold problem has answer no (stage " << d.stage << ")\n";
    return kNo;
  }
  SynthesisOptions opt;
  opt.max_N = c.max_N;
  if (d.mode == Mode::BwcInf) {
    auto syn = bwc_infinite_strategy(d, c.K > 0 ? c.K : 16, opt);
    notes(c, syn.notes);
    if (!syn.ok) {
      std::cerr << syn.message << "\n";
      return kError;
    }
    auto& f = *syn.strategy;
    json j = f.to_json();
    if (c.K <= 0) {
      SimOptions pilot;
      pilot.runs = 200;
      pilot.horizon = c.horizon;
      pilot.seed = c.seed;
      auto t = tune_fk(f, pilot, 0.01, std::int64_t(1) << 16);
      notes(c, t.notes);
      j = f.to_json();
      j["tuning"] = {{"K", t.K}, {"pilot_switch_rate", t.switch_rate}, {"pilot_runs", pilot.runs}};
    }
    j["query"] = query_json(c, m);
    emit(j, c.out);
    return kYes;
  }
  Synthesis syn = d.mode == Mode::BwcFin ? synthesize_bwc_finite(d, opt) : bas_strategy(d, opt);
  notes(c, syn.notes);
  if (!syn.ok) {
    std::cerr << syn.message << "\n";
    return kError;
  }
  auto machine = export_machine(d, *syn.strategy, m);
  json s = syn.to_json();
  if (syn.expectation) s["expectation"] = vector_json(denormalize(*syn.expectation, d.normalized.map));
  json j{{"kind", "machine"},
         {"start", c.from},
         {"query", query_json(c, m)},
         {"synthesis", s},
         {"machine", machine_to_json(machine)}};
  emit(j, c.out);
  return kYes;
}

std::vector<Rational> threshold(const std::string& flag, const json& file, const char* key, std::size_t dim) {
  if (!flag.empty()) return parse_vector(flag);
  if (file.contains("query")) return vector_from(file["query"][key]);
  return std::vector<Rational>(dim, Rational(0));
}

int cmd_verify(const Config& c) {
  Mdp m = load_mdp(c);
  json sj = read_json_file(c.strategy);
  if (sj.value("kind", "") != "machine")
    throw ModelError("only finite machines are verified exactly; simulate f_K records instead");
  auto machine = machine_from_json(m, sj.at("machine"));
  auto chain = induced_chain(m, machine, m.state_index(sj.at("start").get<std::string>()));
  json j{{"check", c.check}, {"chain_nodes", chain.size()}};
  bool ok = false;
  if (c.check == "wc") {
    auto mu = threshold(c.mu, sj, "mu", m.dimension);
    auto rep = verify_worstcase(chain, mu);
    ok = rep.ok;
    j["report"] = rep.to_json(chain);
  } else {
    auto bs = bscc_analysis(chain);
    auto e = expected_mp(bs, m.dimension);
    j["expectation"] = vector_json(e);
    j["bsccs"] = bs.size();
    if (c.check == "as") {
      auto mu = threshold(c.mu, sj, "mu", m.dimension);
      ok = verify_almost_sure(bs, mu);
    } else {
      ok = dominates(e, threshold(c.nu, sj, "nu", m.dimension));
    }
  }
  j["ok"] = ok;
  emit(j);
  return ok ? kYes : kNo;
}

int cmd_simulate(const Config& c) {
  Mdp m = load_mdp(c);
  json sj = read_json_file(c.strategy);
  SimOptions opt;
  opt.runs = c.runs;
  opt.horizon = c.horizon;
  opt.seed = c.seed;
  if (!c.mu.empty())
    opt.mu = parse_vector(c.mu);
  else if (sj.contains("query"))
    opt.mu = vector_from(sj["query"]["mu"]);
  SimReport r;
  if (sj.value("kind", "") == "machine") {
    auto machine = machine_from_json(m, sj.at("machine"));
    r = simulate(m, machine, m.state_index(sj.at("start").get<std::string>()), opt);
  } else {
    r = simulate(infinite_from_json(m, sj), opt);
  }
  emit(r.to_json());
  return kYes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multidimensional mean-payoff MDPs: decision, synthesis, verification, simulation"};
  app.require_subcommand(1);
  Config c;

  auto add_mdp = [&](CLI::App* s) { s->add_option("--mdp", c.mdp_path, "MDP JSON file")->required(); };
  auto add_query = [&](CLI::App* s) {
    s->add_option("--mode", c.mode, "wc|exp|bas|bwc-fin|bwc-inf")->required();
    s->add_option("--from", c.from, "initial state id")->required();
    s->add_option("--mu", c.mu, "worst-case threshold, comma-separated rationals");
    s->add_option("--nu", c.nu, "expectation threshold, comma-separated rationals");
    s->add_option("--adversary-cap", c.adversary_cap, "adversary enumeration budget")->capture_default_str();
  };
  auto add_verbose = [&](CLI::App* s) { s->add_flag("-v,--verbose", c.verbose, "diagnostics on stderr"); };

  auto* validate_cmd = app.add_subcommand("validate", "check an MDP file");
  add_mdp(validate_cmd);
  auto* info = app.add_subcommand("info", "dimension, W, Q and counts");
  add_mdp(info);

  auto* decompose_cmd = app.add_subcommand("decompose", "SCC, MEC or MWEC decomposition");
  add_mdp(decompose_cmd);
  decompose_cmd->add_option("--kind", c.kind)->required()->check(CLI::IsMember({"scc", "mec", "mwec"}));
  decompose_cmd->add_option("--mu", c.mu, "worst-case threshold for mwec (default 0)");
  decompose_cmd->add_option("--adversary-cap", c.adversary_cap)->capture_default_str();

  auto* prune_cmd = app.add_subcommand("prune", "restrict to the worst-case winning region reachable from a state");
  add_mdp(prune_cmd);
  prune_cmd->add_option("--from", c.from)->required();
  prune_cmd->add_option("--mu", c.mu, "worst-case threshold (default 0)");
  prune_cmd->add_option("--adversary-cap", c.adversary_cap)->capture_default_str();

  auto* decide_cmd = app.add_subcommand("decide", "answer a threshold problem (exit 0 yes, 1 no)");
  add_mdp(decide_cmd);
  add_query(decide_cmd);
  decide_cmd->add_option("--dump-lp", c.dump_lp, "write the linear system as text");

  auto* synth = app.add_subcommand("synthesize", "build a witness strategy");
  add_mdp(synth);
  add_query(synth);
  add_verbose(synth);
  synth->add_option("--out", c.out, "strategy file (default stdout)");
  synth->add_option("--max-N", c.max_N, "phase I doubling budget")->capture_default_str();
  synth->add_option("--K", c.K, "f_K phase length (default: tuned by pilot simulation)");
  synth->add_option("--seed", c.seed, "pilot simulation seed")->capture_default_str();
  synth->add_option("--horizon", c.horizon, "pilot simulation horizon")->capture_default_str();

  auto* verify_cmd = app.add_subcommand("verify", "exact check of a finite strategy (exit 0 yes, 1 no)");
  add_mdp(verify_cmd);
  verify_cmd->add_option("--strategy", c.strategy)->required();
  verify_cmd->add_option("--check", c.check)->required()->check(CLI::IsMember({"wc", "as", "exp"}));
  verify_cmd->add_option("--mu", c.mu, "default: the query stored with the strategy");
  verify_cmd->add_option("--nu", c.nu, "default: the query stored with the strategy");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo statistics of a strategy");
  add_mdp(sim);
  sim->add_option("--strategy", c.strategy)->required();
  sim->add_option("--runs", c.runs)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--horizon", c.horizon)->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", c.seed)->capture_default_str();
  sim->add_option("--mu", c.mu, "threshold for the exceedance fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kYes : kError;
  }

  try {
    if (*validate_cmd) return cmd_validate(c);
    if (*info) return cmd_info(c);
    if (*decompose_cmd) return cmd_decompose(c);
    if (*prune_cmd) return cmd_prune(c);
    if (*decide_cmd) return cmd_decide(c);
    if (*synth) return cmd_synthesize(c);
    if (*verify_cmd) return cmd_verify(c);
    if (*sim) return cmd_simulate(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
