#pragma once

// Random walks, Wiener paths and Euler-Maruyama diffusions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/montecarlo.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"
#include "simlab/stats.hpp"

namespace simlab {

template <class T>
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<T>> states;

  std::size_t size() const { return times.size(); }
  void push(double t, std::vector<T> x) {
    times.push_back(t);
    states.push_back(std::move(x));
  }
};

// ---------------------------------------------------------------------------
// Random walks

struct WalkSpec {
  double p = 0.5;  // probability of a +1 step
  long x0 = 0;
  std::size_t steps = 0;
};

/// Simple walk on Z; times are 0..steps.
inline Trajectory<long> random_walk(const WalkSpec& spec, RandomStream& stream) {
  if (!(spec.p > 0.0 && spec.p < 1.0)) throw std::invalid_argument("random_walk: need 0 < p < 1");
  Trajectory<long> tr;
  tr.times.reserve(spec.steps + 1);
  tr.states.reserve(spec.steps + 1);
  long x = spec.x0;
  tr.push(0.0, {x});
  for (std::size_t t = 1; t <= spec.steps; ++t) {
    x += sample_bernoulli(spec.p, stream) ? 1 : -1;
    tr.push(static_cast<double>(t), {x});
  }
  return tr;
}

/// Walk on Z^d with steps drawn from `directions`.
inline Trajectory<long> random_walk_dd(const DiscreteDistribution<std::vector<long>>& directions,
                                       const std::vector<long>& x0, std::size_t steps,
                                       RandomStream& stream) {
  for (const auto& d : directions.states())
    if (d.size() != x0.size())
      throw std::invalid_argument("random_walk_dd: direction dimension differs from x0");
  Trajectory<long> tr;
  std::vector<long> x = x0;
  tr.push(0.0, x);
  for (std::size_t t = 1; t <= steps; ++t) {
    const auto& d = sample_discrete(directions, stream);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += d[i];
    tr.push(static_cast<double>(t), x);
  }
  return tr;
}

/// +/- unit vectors in Z^d with equal probability 1/(2d).
inline DiscreteDistribution<std::vector<long>> symmetric_directions(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("symmetric_directions: dim must be positive");
  std::vector<std::vector<long>> dirs;
  for (std::size_t i = 0; i < dim; ++i)
    for (long s : {-1L, 1L}) {
      std::vector<long> d(dim, 0);
      d[i] = s;
      dirs.push_back(d);
    }
  std::vector<double> probs(dirs.size(), 1.0 / static_cast<double>(dirs.size()));
  return DiscreteDistribution<std::vector<long>>::sorted(std::move(dirs), std::move(probs));
}

/// Exact ruin probability from K with target T.
inline double gamblers_ruin_exact(long k, long target, double p) {
  const double q = 1.0 - p;
  if (p == q) return static_cast<double>(target - k) / static_cast<double>(target);
  const double r = q / p;
  return 1.0 - (1.0 - std::pow(r, static_cast<double>(k))) / (1.0 - std::pow(r, static_cast<double>(target)));
}

/// MC ruin probability; simulation k runs on substream k.
inline EstimateReport gamblers_ruin(long k, long target, double p, std::size_t n_sims,
                                    const RandomStream& stream, double level = 0.95,
                                    std::vector<double>* per_path = nullptr) {
  if (!(0 < k && k < target)) throw std::invalid_argument("gamblers_ruin: need 0 < K < T");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("gamblers_ruin: need 0 < p < 1");
  if (n_sims < 2) throw std::invalid_argument("gamblers_ruin: n_sims must be >= 2");
  RunningStats s;
  for (std::size_t i = 0; i < n_sims; ++i) {
    RandomStream local = stream.spawn_substream(i);
    long x = k;
    while (x > 0 && x < target) x += sample_bernoulli(p, local) ? 1 : -1;
    s.push(x == 0 ? 1.0 : 0.0);
    if (per_path) per_path->push_back(x == 0 ? 1.0 : 0.0);
  }
  return make_report(s, level);
}

struct StartupParams {
  double delta = 2e6;
  double v0 = 10e6;
  double v_max = 100e6;
  double c_operate = 10e3;
  double c_invest = 200e3;
  double p = 0.6;
  std::size_t n_sims = 5000;
};

struct StartupRun {
  bool bankrupt;
  long duration;  // periods operated
  double profit;  // acquisition: payout - V0 - duration*(c_op + c_inv); bankruptcy: -loss
};

struct StartupReport {
  EstimateReport bankruptcy;
  EstimateReport duration;
  double expected_profit_if_acquired = 0.0;  // NaN when no run was acquired
  double expected_loss_if_bankrupt = 0.0;    // NaN when no run went bankrupt
  std::vector<StartupRun> runs;
};

/// Valuation walk in units of delta, absorbed at 0 (bankruptcy) and v_max
/// (acquisition). Costs accrue once per operating period.
inline StartupReport startup_valuation(const StartupParams& prm, const RandomStream& stream,
                                       double level = 0.95) {
  if (!(prm.delta > 0.0)) throw std::invalid_argument("startup_valuation: delta must be positive");
  const double k_real = prm.v0 / prm.delta;
  const double t_real = prm.v_max / prm.delta;
  if (std::abs(k_real - std::round(k_real)) > 1e-9 || std::abs(t_real - std::round(t_real)) > 1e-9)
    throw std::invalid_argument("startup_valuation: V0 and v_max must be multiples of delta");
  const auto k = static_cast<long>(std::round(k_real));
  const auto target = static_cast<long>(std::round(t_real));
  if (!(0 < k && k < target)) throw std::invalid_argument("startup_valuation: need 0 < V0 < v_max");
  if (prm.n_sims < 2) throw std::invalid_argument("startup_valuation: n_sims must be >= 2");

  StartupReport rep;
  RunningStats bankrupt, duration, profit, loss;
  const double cost = prm.c_operate + prm.c_invest;
  for (std::size_t i = 0; i < prm.n_sims; ++i) {
    RandomStream local = stream.spawn_substream(i);
    long x = k, t = 0;
    while (x > 0 && x < target) {
      x += sample_bernoulli(prm.p, local) ? 1 : -1;
      ++t;
    }
    const bool is_bankrupt = x == 0;
    const double spent = prm.v0 + static_cast<double>(t) * cost;
    StartupRun run{is_bankrupt, t, is_bankrupt ? -spent : prm.v_max - spent};
    bankrupt.push(is_bankrupt ? 1.0 : 0.0);
    duration.push(static_cast<double>(t));
    if (is_bankrupt)
      loss.push(spent);
    else
      profit.push(run.profit);
    rep.runs.push_back(run);
  }
  rep.bankruptcy = make_report(bankrupt, level);
  rep.duration = make_report(duration, level);
  rep.expected_profit_if_acquired = profit.count() ? profit.mean() : std::nan("");
  rep.expected_loss_if_bankrupt = loss.count() ? loss.mean() : std::nan("");
  return rep;
}

// ---------------------------------------------------------------------------
// Wiener process

/// W at the given times (W_0 = 0 at times[0] = 0; a first time > 0 gets an
/// increment from 0). Coordinates are independent.
inline Trajectory<double> wiener_path(const std::vector<double>& times, std::size_t dim,
                                      RandomStream& stream) {
  if (times.empty()) throw std::invalid_argument("wiener_path: empty time grid");
  if (dim == 0) throw std::invalid_argument("wiener_path: dim must be positive");
  if (times.front() < 0.0) throw std::invalid_argument("wiener_path: times must start at >= 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("wiener_path: times must be strictly increasing");
  Trajectory<double> tr;
  std::vector<double> w(dim, 0.0);
  double prev = 0.0;
  for (double t : times) {
    const double dt = t - prev;
    if (dt > 0.0) {
      const double sd = std::sqrt(dt);
      for (auto& wi : w) wi += sd * sample_standard_normal(stream);
    }
    tr.push(t, w);
    prev = t;
  }
  return tr;
}

inline std::vector<double> uniform_grid(double t0, double t_end, double dt) {
  if (!(dt > 0.0) || !(t0 < t_end)) throw std::invalid_argument("uniform_grid: need dt > 0 and t0 < t_end");
  const auto steps = static_cast<std::size_t>(std::ceil((t_end - t0) / dt - 1e-9));
  std::vector<double> ts;
  ts.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) ts.push_back(t0 + static_cast<double>(k) * dt);
  ts.push_back(t_end);
  return ts;
}

// ---------------------------------------------------------------------------
// Diffusions

using CoefficientFn = std::function<double(double, double)>;

struct DiffusionSpec {
  CoefficientFn drift;      // a(t, x)
  CoefficientFn diffusion;  // b(t, x); empty means a pure ODE and no draws
  double t0 = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
  double x0 = 0.0;
};

namespace detail {

inline void check_diffusion_spec(const DiffusionSpec& spec) {
  if (!spec.drift) throw std::invalid_argument("euler_maruyama: drift is required");
  if (!(spec.dt > 0.0)) throw std::invalid_argument("euler_maruyama: dt must be positive");
  if (!(spec.t0 < spec.t_end)) throw std::invalid_argument("euler_maruyama: need t0 < t_end");
}

// Runs the scheme; `record` sees every (t, y).
template <class Record>
double euler_maruyama_run(const DiffusionSpec& spec, RandomStream& stream, Record&& record) {
  check_diffusion_spec(spec);
  const auto steps = static_cast<std::size_t>(std::ceil((spec.t_end - spec.t0) / spec.dt - 1e-9));
  double y = spec.x0;
  double t = spec.t0;
  record(t, y);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t_next = k + 1 == steps ? spec.t_end : spec.t0 + static_cast<double>(k + 1) * spec.dt;
    const double h = t_next - t;
    const double z = spec.diffusion ? sample_standard_normal(stream) : 0.0;
    double y_next = y + spec.drift(t, y) * h;
    if (spec.diffusion) y_next += spec.diffusion(t, y) * std::sqrt(h) * z;
    if (!std::isfinite(y_next))
      throw numerical_error("euler_maruyama: state became non-finite at step " + std::to_string(k + 1) +
                            " (t = " + std::to_string(t_next) + ")");
    y = y_next;
    t = t_next;
    record(t, y);
  }
  return y;
}

}  // namespace detail

/// Y_{k+1} = Y_k + a dt + b sqrt(dt) Z, one normal per step drawn before the
/// update. The last step is shortened to land on t_end.
inline Trajectory<double> euler_maruyama(const DiffusionSpec& spec, RandomStream& stream) {
  Trajectory<double> tr;
  detail::euler_maruyama_run(spec, stream, [&](double t, double y) { tr.push(t, {y}); });
  return tr;
}

/// Terminal value only; same draws as euler_maruyama.
inline double euler_maruyama_terminal(const DiffusionSpec& spec, RandomStream& stream) {
  return detail::euler_maruyama_run(spec, stream, [](double, double) {});
}

/// Mean first time (dt * steps) at which some |W_i| >= half_width, checked
/// after each step. Simulation k runs on substream k.
inline EstimateReport hitting_time_box(std::size_t dim, double half_width, double dt,
                                       std::size_t n_sims, const RandomStream& stream,
                                       double level = 0.95, std::vector<double>* per_path = nullptr) {
  if (dim == 0) throw std::invalid_argument("hitting_time_box: dim must be positive");
  if (!(dt > 0.0) || !(half_width > 0.0))
    throw std::invalid_argument("hitting_time_box: need dt > 0 and half_width > 0");
  if (n_sims < 2) throw std::invalid_argument("hitting_time_box: n_sims must be >= 2");
  const double sd = std::sqrt(dt);
  RunningStats s;
  std::vector<double> w(dim);
  for (std::size_t i = 0; i < n_sims; ++i) {
    RandomStream local = stream.spawn_substream(i);
    std::fill(w.begin(), w.end(), 0.0);
    std::size_t steps = 0;
    for (;;) {
      ++steps;
      bool out = false;
      for (auto& wi : w) {
        wi += sd * sample_standard_normal(local);
        if (std::abs(wi) >= half_width) out = true;
      }
      if (out) break;
    }
    s.push(dt * static_cast<double>(steps));
    if (per_path) per_path->push_back(dt * static_cast<double>(steps));
  }
  return make_report(s, level);
}

struct OptionParams {
  double s0 = 102.0;
  double strike = 100.0;
  double rate = 0.04;
  double sigma = 0.3;
  double maturity = 0.5;
  double dt = 1e-3;
  std::size_t n_sims = 10000;
};

/// exp(-rT) E[max(S_T - K, 0)] with S from Euler-Maruyama under the
/// risk-neutral drift. The CI is on the discounted payoffs; `per_path`
/// receives each terminal price.
inline EstimateReport price_european_call(const OptionParams& prm, const RandomStream& stream,
                                          double level = 0.95, std::vector<double>* per_path = nullptr) {
  if (!(prm.s0 > 0.0 && prm.strike > 0.0 && prm.sigma > 0.0 && prm.maturity > 0.0 && prm.dt > 0.0))
    throw std::invalid_argument("price_european_call: parameters must be positive");
  if (prm.n_sims < 2) throw std::invalid_argument("price_european_call: n_sims must be >= 2");
  DiffusionSpec spec;
  spec.drift = [r = prm.rate](double, double x) { return r * x; };
  spec.diffusion = [s = prm.sigma](double, double x) { return s * x; };
  spec.t0 = 0.0;
  spec.t_end = prm.maturity;
  spec.dt = prm.dt;
  spec.x0 = prm.s0;
  const double discount = std::exp(-prm.rate * prm.maturity);
  RunningStats s;
  for (std::size_t i = 0; i < prm.n_sims; ++i) {
    RandomStream local = stream.spawn_substream(i);
    const double st = euler_maruyama_terminal(spec, local);
    s.push(discount * std::max(st - prm.strike, 0.0));
    if (per_path) per_path->push_back(st);
  }
  return make_report(s, level);
}

}  // namespace simlab
