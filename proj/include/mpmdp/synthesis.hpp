#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpmdp/strategy.hpp"
#include "mpmdp/systems.hpp"
#include "mpmdp/verify.hpp"

namespace mpmdp {

// Phase I read off a flow witness: at s with inflow I(s), switch with
// probability y_s / I(s), otherwise move along e with probability y_e / (I(s) - y_s).
struct Phase1 {
  std::size_t start = 0;
  std::vector<Rational> inflow;
  std::vector<Rational> switch_prob;
  std::vector<Dist<std::size_t>> move;  // controller states; a fixed edge where the flow is zero
};

Phase1 phase1_strategy(const Mdp& mdp, const ThresholdSystem& sys, const std::vector<Rational>& assignment,
                       std::size_t start);

// Positive-frequency part of an EC solution, split into its SCCs S_i.
struct LocalComponent {
  std::vector<std::size_t> states;
  Rational x;                     // share of the long-run frequency
  std::vector<Rational> nu;       // mean payoff of g_i
  std::vector<Dist<std::size_t>> g;  // per MDP state, controller states of S_i only
};

// x_edge: frequencies per MDP edge (any positive scaling), zero outside the EC.
std::vector<LocalComponent> local_strategies(const Mdp& mdp, const std::vector<std::size_t>& ec,
                                             const std::vector<Rational>& x_edge);

// Cycles through the components: reach S_i, then follow g_i for A*c_i steps.
// Memory (i, j). Defined on the states of ec.
StrategyPtr global_unichain(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<LocalComponent>& locals,
                            std::int64_t A);

// Memoryless reach strategy toward target inside the given state set.
std::vector<std::size_t> reach_strategy(const Mdp& mdp, const std::vector<std::size_t>& within,
                                        const std::vector<std::size_t>& target);

struct WecParams {
  std::int64_t K = 0;
  std::int64_t L = 0;
  Rational mu_star;  // worst-case margin used by the monitor
  Rational delta;
  std::int64_t W = 0;
  std::int64_t m = 0;  // |memory of f^wc| * |states|
};

// L = ceil((2K(W + mu* - delta) + m(2W + 2mu* - delta)) / delta).
std::int64_t recovery_length(std::int64_t K, std::int64_t W, const Rational& mu_star, const Rational& delta, std::int64_t m);

// K-step expectation periods under g with a running sum; a period whose sum
// falls below (mu* - delta)K in some dimension of dims is followed by L steps of fwc.
// Memory layout: [period kind, step, sums..., sub-machine memory...].
class WecCombined : public Strategy {
 public:
  WecCombined(const Mdp& mdp, StrategyPtr g, StrategyPtr fwc, Dims dims, WecParams p);
  Dist<Memory> initial() const override;
  Dist<std::size_t> output(std::size_t state, const Memory& m) const override;
  Dist<Memory> update(std::size_t edge, const Memory& m) const override;
  const WecParams& params() const { return p_; }

 private:
  Dist<Memory> wrap(std::int64_t kind, const Dist<Memory>& sub) const;
  const Mdp* mdp_;
  StrategyPtr g_, wc_;
  Dims dims_;
  WecParams p_;
  Rational bar_;  // (mu* - delta) K
};

// Phase I capped at N steps (N = 0: no cap), then the machine of the
// component entered, or the fallback once the cap is hit outside every component
// (or anywhere, with cap_to_fallback).
class PhaseComposite : public Strategy {
 public:
  PhaseComposite(const Mdp& mdp, Phase1 p1, std::vector<std::vector<std::size_t>> components,
                 std::vector<StrategyPtr> inside, StrategyPtr fallback, std::int64_t N, bool cap_to_fallback = false);
  Dist<Memory> initial() const override;
  Dist<std::size_t> output(std::size_t state, const Memory& m) const override;
  Dist<Memory> update(std::size_t edge, const Memory& m) const override;

  static constexpr std::int64_t kPhase1 = 0;
  std::int64_t fallback_tag() const { return static_cast<std::int64_t>(inside_.size()) + 1; }

 private:
  Dist<Memory> arrive(std::size_t state, std::int64_t steps) const;
  Dist<Memory> enter(std::int64_t tag, const Dist<Memory>& sub) const;
  const Mdp* mdp_;
  Phase1 p1_;
  std::vector<long> comp_of_;
  std::vector<StrategyPtr> inside_;
  StrategyPtr fallback_;
  std::int64_t N_;
  bool cap_to_fallback_;
};

struct WcSearchOptions {
  std::size_t memoryless_budget = 1u << 16;
  std::size_t two_memory_budget = 1u << 16;
};

// A finite-memory controller strategy winning MP > 0 in dims from every state
// of mdp. Tries a positional strategy from value iteration (one dimension),
// memoryless pure strategies, then two-memory machines. nullopt when the
// budget is exhausted.
std::optional<ExplicitMachine> memoryless_wc_search(const Mdp& mdp, const Dims& dims, const WcSearchOptions& opt = {});

// Worst-case check from every state of the MDP at once.
WorstCaseReport verify_worstcase_everywhere(const Mdp& mdp, const Strategy& f, const Dims& dims);

// Smallest cycle mean, over dims, of the product reachable from every state.
std::optional<Rational> worstcase_margin(const Mdp& mdp, const Strategy& f, const Dims& dims);

struct SynthesisOptions {
  std::int64_t max_N = 1 << 16;
  std::int64_t max_A = 1 << 10;
  std::int64_t max_K = 1 << 12;
  std::size_t max_chain = 200'000;    // product nodes for exact analysis of the composed strategy
  std::size_t max_combined = 20'000;  // product nodes for one combined component machine
  // Fallback when no combined machine verifies: pure task-counter strategies.
  std::size_t counter_memory = 4;
  std::size_t counter_budget = std::size_t(1) << 17;
  WcSearchOptions wc;
};

// Outcome of a synthesis run on the working MDP of a decision.
struct Synthesis {
  bool ok = false;
  std::string message;
  StrategyPtr strategy;        // on decision.working, started at decision.start
  std::int64_t N = 0, A = 0, K = 0;
  std::optional<std::vector<Rational>> expectation;  // exact, normalized units
  std::optional<bool> worst_case;                    // exact verdict when checked
  std::optional<bool> almost_sure;
  std::vector<std::string> notes;
  json to_json() const;
};

// The phase-II machine for one component together with its exact expectation.
struct ComponentMachine {
  StrategyPtr machine;
  std::vector<Rational> expectation;
  bool unichain = false;
};

// Unichain machine on ec for the frequencies x_edge, doubling A until the
// expectation beats target in every dimension (or max_A is reached).
ComponentMachine unichain_for(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<Rational>& x_edge,
                              const std::vector<Rational>& target, std::int64_t max_A, std::int64_t* A_used = nullptr);

// Tabulated form of a synthesized strategy over the MDP the query was posed
// on (ids shared with the working MDP; an inserted pre-state is folded away).
ExplicitMachine export_machine(const Decision& d, const Strategy& f, const Mdp& original,
                               std::size_t max_pairs = 2'000'000);

Synthesis bwc_finite_strategy(const Decision& d, std::int64_t N, const SynthesisOptions& opt = {});
Synthesis synthesize_bwc_finite(const Decision& d, const SynthesisOptions& opt = {});
Synthesis bas_strategy(const Decision& d, const SynthesisOptions& opt = {});

// f_K: plays f^exp inside a component in phases of K steps and switches to
// f^wc for good once the total payoff since entering falls to the bounds
// N_i = nu*i*K/2 (during phase i >= 1) or 2*N_{i+1} (at the end of phase i).
struct FkComponent {
  std::vector<std::size_t> states;
  ExplicitMachine exp;
  std::vector<Rational> expectation;  // exact, of exp
  std::vector<Rational> nu;           // monitor target
};

struct InfiniteStrategy {
  const Mdp* mdp = nullptr;
  std::int64_t start_steps = 0;           // phase I steps already taken at phase1.start
  std::optional<std::size_t> prestate;    // inserted pre-state, dropped on export
  Normalization map;                      // weights seen by the monitor: w*scale - shift
  bool apply_map = false;                 // false when mdp already carries normalized weights
  std::int64_t K = 0;
  std::int64_t N = 0;  // phase I cap
  Dims dims;
  Phase1 phase1;
  std::vector<FkComponent> components;
  std::optional<ExplicitMachine> wc;
  std::vector<Rational> nominal;  // expectation if no monitor ever fires
  json to_json() const;
};

std::vector<Rational> fk_bound(const std::vector<Rational>& nu, std::int64_t i, std::int64_t K);  // N_i

struct InfiniteSynthesis {
  bool ok = false;
  std::string message;
  std::optional<InfiniteStrategy> strategy;
  std::vector<std::string> notes;
};

InfiniteSynthesis bwc_infinite_strategy(const Decision& d, std::int64_t K, const SynthesisOptions& opt = {});
InfiniteStrategy infinite_from_json(const Mdp& mdp, const json& j);

}  // namespace mpmdp
