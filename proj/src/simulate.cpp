#include "mpmdp/simulate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpmdp {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Discrete distributions flattened into cumulative tables.
struct Table {
  std::vector<std::uint32_t> begin;  // size slots + 1
  std::vector<std::int64_t> value;
  std::vector<double> cdf;

  void add_slot(const std::vector<std::pair<std::int64_t, double>>& d) {
    if (begin.empty()) begin.push_back(0);
    double acc = 0;
    for (const auto& [v, p] : d) {
      acc += p;
      value.push_back(v);
      cdf.push_back(acc);
    }
    if (!d.empty()) cdf.back() = 1.0;
    begin.push_back(static_cast<std::uint32_t>(value.size()));
  }
  bool empty(std::size_t slot) const { return begin[slot] == begin[slot + 1]; }
  std::int64_t draw(std::size_t slot, SplitMix64& rng) const {
    auto lo = begin[slot], hi = begin[slot + 1];
    if (lo == hi) throw std::logic_error("sampling from an undefined strategy entry");
    if (hi - lo == 1) return value[lo];
    double u = rng.uniform();
    for (auto k = lo; k + 1 < hi; ++k)
      if (u < cdf[k]) return value[k];
    return value[hi - 1];
  }
};

template <class T>
std::vector<std::pair<std::int64_t, double>> to_double(const Dist<T>& d) {
  std::vector<std::pair<std::int64_t, double>> r;
  for (const auto& [v, p] : d) r.push_back({static_cast<std::int64_t>(v), p.get_d()});
  return r;
}

// Random successor edges of every random state.
Table random_moves(const Mdp& mdp) {
  Table t;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    std::vector<std::pair<std::int64_t, double>> d;
    if (mdp.is_random(s))
      for (auto e : mdp.out(s)) d.push_back({static_cast<std::int64_t>(e), mdp.edges[e].prob.get_d()});
    t.add_slot(d);
  }
  return t;
}

// An explicit machine with slots state*M + m and edge*M + m.
struct CompiledMachine {
  std::size_t M = 1;
  Table alpha, out, upd;

  CompiledMachine(const Mdp& mdp, const ExplicitMachine& f) : M(f.memory_size()) {
    if (M * std::max(mdp.num_states(), mdp.num_edges()) > (std::size_t(1) << 28))
      throw std::length_error("machine too large to simulate");
    alpha.add_slot(to_double(f.alpha));
    for (std::size_t s = 0; s < mdp.num_states(); ++s)
      for (std::size_t m = 0; m < M; ++m) {
        auto* d = f.find_output(s, static_cast<std::int64_t>(m));
        out.add_slot(d ? to_double(*d) : std::vector<std::pair<std::int64_t, double>>{});
      }
    for (std::size_t e = 0; e < mdp.num_edges(); ++e)
      for (std::size_t m = 0; m < M; ++m) {
        auto* d = f.find_update(e, static_cast<std::int64_t>(m));
        if (d)
          upd.add_slot(to_double(*d));
        else
          upd.add_slot(M == 1 ? std::vector<std::pair<std::int64_t, double>>{{0, 1.0}}
                              : std::vector<std::pair<std::int64_t, double>>{});
      }
  }
  std::int64_t initial(SplitMix64& rng) const { return alpha.draw(0, rng); }
  std::size_t choose(std::size_t s, std::int64_t m, SplitMix64& rng) const {
    return static_cast<std::size_t>(out.draw(s * M + static_cast<std::size_t>(m), rng));
  }
  std::int64_t next(std::size_t e, std::int64_t m, SplitMix64& rng) const {
    return upd.draw(e * M + static_cast<std::size_t>(m), rng);
  }
};

struct Stats {
  std::size_t d;
  std::vector<double> mean, m2, lo, hi;
  std::size_t n = 0, exceed = 0;
  explicit Stats(std::size_t dim)
      : d(dim),
        mean(dim, 0),
        m2(dim, 0),
        lo(dim, std::numeric_limits<double>::infinity()),
        hi(dim, -std::numeric_limits<double>::infinity()) {}

  void add(const std::vector<std::int64_t>& sum, std::size_t horizon, const std::optional<std::vector<Rational>>& mu) {
    ++n;
    bool above = true;
    for (std::size_t i = 0; i < d; ++i) {
      double x = static_cast<double>(sum[i]) / static_cast<double>(horizon);
      double delta = x - mean[i];
      mean[i] += delta / static_cast<double>(n);
      m2[i] += delta * (x - mean[i]);
      lo[i] = std::min(lo[i], x);
      hi[i] = std::max(hi[i], x);
      // exact comparison: sum/horizon > mu
      if (mu) above = above && Rational(sum[i]) > (*mu)[i] * static_cast<long>(horizon);
    }
    if (mu && above) ++exceed;
  }

  SimReport report(const SimOptions& opt) const {
    SimReport r;
    r.runs = opt.runs;
    r.horizon = opt.horizon;
    r.seed = opt.seed;
    r.mean = mean;
    r.min = lo;
    r.max = hi;
    for (std::size_t i = 0; i < d; ++i) r.stddev.push_back(n > 1 ? std::sqrt(m2[i] / static_cast<double>(n - 1)) : 0.0);
    if (opt.mu) r.exceed_fraction = static_cast<double>(exceed) / static_cast<double>(n);
    return r;
  }
};

void check_options(const Mdp& mdp, const SimOptions& opt) {
  if (opt.runs < 1 || opt.horizon < 1) throw std::invalid_argument("simulation needs runs >= 1 and horizon >= 1");
  if (opt.mu && opt.mu->size() != mdp.dimension) throw std::invalid_argument("mu has the wrong dimension");
}

}  // namespace

std::uint64_t SplitMix64::operator()() {
  state += 0x9e3779b97f4a7c15ULL;
  return mix(state);
}

std::uint64_t run_seed(std::uint64_t seed, std::uint64_t run) { return mix(mix(seed) ^ (run * 0xd1b54a32d192ed03ULL + 1)); }

json SimReport::to_json() const {
  json j;
  j["approximate"] = true;
  j["runs"] = runs;
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["mean"] = mean;
  j["min"] = min;
  j["max"] = max;
  j["stddev"] = stddev;
  if (exceed_fraction) j["exceed_fraction"] = *exceed_fraction;
  j["monitor_violations"] = monitor_violations;
  j["switched_runs"] = switched_runs;
  return j;
}

SimReport simulate(const Mdp& mdp, const ExplicitMachine& f, std::size_t start, const SimOptions& opt) {
  check_options(mdp, opt);
  CompiledMachine cm(mdp, f);
  Table nature = random_moves(mdp);
  const std::size_t d = mdp.dimension;
  std::vector<std::int64_t> flat(mdp.num_edges() * d);
  for (std::size_t e = 0; e < mdp.num_edges(); ++e)
    for (std::size_t i = 0; i < d; ++i) flat[e * d + i] = mdp.edges[e].weight[i];
  std::vector<std::size_t> target(mdp.num_edges());
  for (std::size_t e = 0; e < mdp.num_edges(); ++e) target[e] = mdp.edges[e].to;

  Stats stats(d);
  std::vector<std::int64_t> sum(d);
  for (std::size_t r = 0; r < opt.runs; ++r) {
    SplitMix64 rng(run_seed(opt.seed, r));
    std::fill(sum.begin(), sum.end(), 0);
    std::size_t s = start;
    std::int64_t m = cm.initial(rng);
    for (std::size_t t = 0; t < opt.horizon; ++t) {
      std::size_t e = mdp.is_random(s) ? static_cast<std::size_t>(nature.draw(s, rng)) : cm.choose(s, m, rng);
      for (std::size_t i = 0; i < d; ++i) sum[i] += flat[e * d + i];
      m = cm.next(e, m, rng);
      s = target[e];
    }
    stats.add(sum, opt.horizon, opt.mu);
  }
  return stats.report(opt);
}

SimReport simulate(const Mdp& mdp, const Strategy& f, std::size_t start, const SimOptions& opt, std::size_t max_pairs) {
  return simulate(mdp, explicitize(mdp, f, start, std::nullopt, max_pairs), start, opt);
}

struct FkRunner::Impl {
  const InfiniteStrategy* f;
  const Mdp* mdp;
  std::size_t d;
  Table nature, p1_move;
  std::vector<double> p1_switch;
  std::vector<long> comp_of;
  std::vector<CompiledMachine> exp;
  std::optional<CompiledMachine> wc;
  std::vector<std::int64_t> raw, mon;  // per edge * d
  // N_i = nu * i * K / 2 as num_i * i * K / den_i per monitored dimension and component
  std::vector<std::vector<std::pair<__int128, __int128>>> bound;

  SplitMix64 rng{0};
  std::size_t state = 0;
  std::int64_t steps = 0;  // phase I steps
  std::int64_t memory = 0;
  Monitor monitor;

  explicit Impl(const InfiniteStrategy& s) : f(&s), mdp(s.mdp), d(s.mdp->dimension), nature(random_moves(*s.mdp)) {
    const Mdp& m = *mdp;
    for (std::size_t st = 0; st < m.num_states(); ++st) p1_move.add_slot(to_double(s.phase1.move[st]));
    for (const auto& p : s.phase1.switch_prob) p1_switch.push_back(p.get_d());
    comp_of.assign(m.num_states(), -1);
    for (std::size_t k = 0; k < s.components.size(); ++k) {
      for (auto st : s.components[k].states) comp_of[st] = static_cast<long>(k);
      exp.emplace_back(m, s.components[k].exp);
      std::vector<std::pair<__int128, __int128>> b;
      for (auto i : s.dims) {
        Rational half = s.components[k].nu[i] / 2;
        b.push_back({to_int64(half.get_num()), to_int64(half.get_den())});
      }
      bound.push_back(std::move(b));
    }
    if (!s.wc) throw std::invalid_argument("f_K needs its worst-case machine");
    wc.emplace(m, *s.wc);
    for (const auto& e : m.edges)
      for (std::size_t i = 0; i < d; ++i) {
        raw.push_back(e.weight[i]);
        mon.push_back(s.apply_map ? to_int64(Integer(Integer(e.weight[i]) * s.map.scale[i] - s.map.shift[i])) : e.weight[i]);
      }
  }

  // TP > N_i, i.e. TP * den > num * i * K.
  bool above(std::int64_t i) const {
    const auto& b = bound[static_cast<std::size_t>(monitor.component)];
    for (std::size_t k = 0; k < f->dims.size(); ++k) {
      __int128 lhs = static_cast<__int128>(monitor.total[f->dims[k]]) * b[k].second;
      __int128 rhs = b[k].first * i * f->K;
      if (!(lhs > rhs)) return false;
    }
    return true;
  }

  void go_worst() {
    monitor.mode = Mode::WorstCase;
    memory = wc->initial(rng);
  }

  void arrive(std::size_t s) {
    state = s;
    double p = p1_switch[s];
    if (p > 0 && (p >= 1 || rng.uniform() < p)) {
      monitor.mode = Mode::Expectation;
      monitor.component = comp_of[s];
      if (monitor.component < 0) throw std::logic_error("switching outside every component");
      monitor.phase = 0;
      monitor.step_in_phase = 0;
      std::fill(monitor.total.begin(), monitor.total.end(), 0);
      memory = exp[static_cast<std::size_t>(monitor.component)].initial(rng);
      return;
    }
    if (f->N > 0 && steps >= f->N) go_worst();
  }

  void reset(std::uint64_t seed) {
    rng = SplitMix64(seed);
    monitor = Monitor{};
    monitor.total.assign(d, 0);
    steps = f->start_steps;
    arrive(f->phase1.start);
  }

  std::size_t step() {
    const Mdp& m = *mdp;
    const bool rnd = m.is_random(state);
    std::size_t e = 0;
    switch (monitor.mode) {
      case Mode::Phase1: {
        e = rnd ? static_cast<std::size_t>(nature.draw(state, rng)) : static_cast<std::size_t>(p1_move.draw(state, rng));
        ++steps;
        arrive(m.edges[e].to);
        return e;
      }
      case Mode::Expectation: {
        const auto& cm = exp[static_cast<std::size_t>(monitor.component)];
        e = rnd ? static_cast<std::size_t>(nature.draw(state, rng)) : cm.choose(state, memory, rng);
        memory = cm.next(e, memory, rng);
        for (std::size_t i = 0; i < d; ++i) monitor.total[i] += mon[e * d + i];
        state = m.edges[e].to;
        const std::int64_t i = monitor.phase;
        if (++monitor.step_in_phase == f->K) {
          // SC1 covers the last step of phase i >= 1; SC2 closes the phase.
          if ((i >= 1 && !above(i)) || !above(2 * (i + 1))) {
            monitor.switched = true;
            go_worst();
          } else {
            monitor.phase = i + 1;
            monitor.step_in_phase = 0;
          }
        } else if (i >= 1 && !above(i)) {
          monitor.switched = true;
          go_worst();
        }
        return e;
      }
      case Mode::WorstCase: {
        e = rnd ? static_cast<std::size_t>(nature.draw(state, rng)) : wc->choose(state, memory, rng);
        memory = wc->next(e, memory, rng);
        state = m.edges[e].to;
        return e;
      }
    }
    return e;
  }
};

FkRunner::FkRunner(const InfiniteStrategy& f) : impl_(std::make_unique<Impl>(f)) { impl_->reset(0); }
FkRunner::~FkRunner() = default;
void FkRunner::reset(std::uint64_t seed) { impl_->reset(seed); }
std::size_t FkRunner::step() { return impl_->step(); }
std::size_t FkRunner::state() const { return impl_->state; }
const FkRunner::Monitor& FkRunner::monitor() const { return impl_->monitor; }
bool FkRunner::above_bound() const {
  const auto& mo = impl_->monitor;
  return mo.mode != Mode::Expectation || mo.phase < 1 || impl_->above(mo.phase);
}

SimReport simulate(const InfiniteStrategy& f, const SimOptions& opt) {
  const Mdp& mdp = *f.mdp;
  check_options(mdp, opt);
  FkRunner runner(f);
  const std::size_t d = mdp.dimension;
  std::vector<std::int64_t> raw;
  for (const auto& e : mdp.edges)
    for (std::size_t i = 0; i < d; ++i) raw.push_back(e.weight[i]);
  Stats stats(d);
  std::vector<std::int64_t> sum(d);
  std::int64_t violations = 0, switched = 0;
  for (std::size_t r = 0; r < opt.runs; ++r) {
    runner.reset(run_seed(opt.seed, r));
    std::fill(sum.begin(), sum.end(), 0);
    bool bad = false;
    for (std::size_t t = 0; t < opt.horizon; ++t) {
      auto e = runner.step();
      for (std::size_t i = 0; i < d; ++i) sum[i] += raw[e * d + i];
      if (!runner.above_bound()) bad = true;
    }
    if (bad) ++violations;
    if (runner.monitor().switched) ++switched;
    if (!f.apply_map)  // weights are w*scale - shift; recover the original sum exactly
      for (std::size_t i = 0; i < d; ++i)
        sum[i] = to_int64(Integer((Integer(sum[i]) + f.map.shift[i] * static_cast<long>(opt.horizon)) / f.map.scale[i]));
    stats.add(sum, opt.horizon, opt.mu);
  }
  auto rep = stats.report(opt);
  rep.monitor_violations = violations;
  rep.switched_runs = switched;
  return rep;
}

FkTuning tune_fk(InfiniteStrategy& f, const SimOptions& pilot, double max_switch_rate, std::int64_t max_K) {
  FkTuning t;
  for (std::int64_t K = 16;; K *= 2) {
    f.K = K;
    auto rep = simulate(f, pilot);
    t.K = K;
    t.switch_rate = static_cast<double>(rep.switched_runs) / static_cast<double>(rep.runs);
    t.notes.push_back("K=" + std::to_string(K) + ": switch rate " + std::to_string(t.switch_rate));
    if (t.switch_rate <= max_switch_rate || 2 * K > max_K) return t;
  }
}

}  // namespace mpmdp
