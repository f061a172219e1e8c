#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpmdp/strategy.hpp"
#include "mpmdp/synthesis.hpp"

namespace mpmdp {

// Seed of run r: independent 64-bit streams derived from (seed, r).
std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run);

struct SplitMix64 {
  using result_type = std::uint64_t;
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t s) : state(s) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }
  result_type operator()();
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
};

struct SimOptions {
  std::size_t runs = 1000;
  std::size_t horizon = 10000;
  std::uint64_t seed = 0;
  std::optional<std::vector<Rational>> mu;  // for the exceedance fraction
};

// Floating-point statistics of MP_horizon over the runs, in the units of the
// original weights (f_K runs on normalized weights are mapped back).
// Approximate by nature; never used for verdicts.
struct SimReport {
  std::size_t runs = 0, horizon = 0;
  std::uint64_t seed = 0;
  std::vector<double> mean, min, max, stddev;
  std::optional<double> exceed_fraction;  // runs with MP_horizon > mu in every dimension
  std::int64_t monitor_violations = 0;    // f_K only
  std::int64_t switched_runs = 0;         // f_K only: runs that fell back to f^wc
  json to_json() const;
};

SimReport simulate(const Mdp& mdp, const ExplicitMachine& f, std::size_t start, const SimOptions& opt);
// Tabulates f first (see explicitize).
SimReport simulate(const Mdp& mdp, const Strategy& f, std::size_t start, const SimOptions& opt,
                   std::size_t max_pairs = 2'000'000);
SimReport simulate(const InfiniteStrategy& f, const SimOptions& opt);

// Step-by-step execution of f_K with its monitor exposed.
class FkRunner {
 public:
  enum class Mode { Phase1, Expectation, WorstCase };
  struct Monitor {
    Mode mode = Mode::Phase1;
    long component = -1;
    std::int64_t phase = 0;          // index i of the current K-step phase
    std::int64_t step_in_phase = 0;
    std::vector<std::int64_t> total; // payoff since entering the component, monitor units
    bool switched = false;
  };

  explicit FkRunner(const InfiniteStrategy& f);
  ~FkRunner();
  FkRunner(const FkRunner&) = delete;
  FkRunner& operator=(const FkRunner&) = delete;

  void reset(std::uint64_t seed);
  std::size_t step();  // takes one edge; returns its index
  std::size_t state() const;
  const Monitor& monitor() const;
  // TP > N_i in every monitored dimension for the current phase i >= 1.
  bool above_bound() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct FkTuning {
  std::int64_t K = 0;
  double switch_rate = 0;
  std::vector<std::string> notes;
};

// Doubles K from 16 until pilot simulations switch to f^wc in at most
// max_switch_rate of the runs (or max_K is reached); sets f.K.
FkTuning tune_fk(InfiniteStrategy& f, const SimOptions& pilot, double max_switch_rate, std::int64_t max_K);

}  // namespace mpmdp
