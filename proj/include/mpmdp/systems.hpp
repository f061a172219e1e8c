#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpmdp/io.hpp"
#include "mpmdp/lp.hpp"
#include "mpmdp/model.hpp"
#include "mpmdp/worstcase.hpp"

namespace mpmdp {

// Flow system over y_s, y_e, x_e for a controller-rooted MDP. The same shape
// serves T (components = MWECs) and T' (components = MECs).
struct ThresholdSystem {
  LinearSystem lp;
  std::vector<std::size_t> y_state, y_edge, x_edge;  // variable per state / edge
};

// c3_dims empty drops the per-component strict rows (expectation-only system).
ThresholdSystem build_flow_system(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                                  const std::vector<EndComponent>& components, const Dims& c3_dims);
ThresholdSystem build_T(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                        const std::vector<EndComponent>& mwecs, const Dims& dims);
ThresholdSystem build_Tprime(const Mdp& mdp, std::size_t s0, const std::vector<Rational>& nu,
                             const std::vector<EndComponent>& mecs, const Dims& dims);

struct EcSystem {
  LinearSystem lp;
  std::vector<std::size_t> states, edges;  // MDP indices, aligned with x_state / x_edge
  std::vector<std::size_t> x_state, x_edge;
};

EcSystem build_ec_expectation(const Mdp& mdp, const std::vector<std::size_t>& ec, const std::vector<Rational>& nu,
                              bool strict, const Dims& dims);

// MECs admitting a circulation with strictly positive expectation in every dimension of dims.
std::vector<EndComponent> useful_mecs(const Mdp& mdp, const Dims& dims);

struct DecideOptions {
  WcOptions wc;
};

struct Decision {
  bool answer = false;
  Mode mode = Mode::Wc;
  std::string stage;  // "winning-region", "pruned", "no-component", "system"
  std::vector<bool> trivial;
  Dims dims;
  Normalized normalized;  // full model after normalization
  std::optional<WinningRegion> region;

  // Present once the pipeline reaches the linear system.
  Mdp working;  // pruned/reachable part, rooted at a controller state
  std::size_t start = 0;
  std::optional<std::string> prestate;  // id of the inserted controller pre-state
  std::vector<EndComponent> components;
  std::optional<ThresholdSystem> system;
  std::optional<LpOutcome> lp;

  json to_json() const;
};

Decision decide(const Mdp& mdp, const ThresholdQuery& q, const DecideOptions& opt = {});

}  // namespace mpmdp
