#pragma once

// Named, parameterized experiments behind `simlab run --scenario`. Every
// scenario draws only from substreams of the stream it is given, so a fixed
// (seed, parameters) pair reproduces its output exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/markov.hpp"
#include "simlab/mcmc.hpp"
#include "simlab/montecarlo.hpp"
#include "simlab/processes.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"
#include "simlab/ssa.hpp"
#include "simlab/stats.hpp"

namespace simlab {

using ParamMap = std::map<std::string, double>;

/// Resolved parameters of one scenario run: declared defaults overlaid with
/// caller values.
class ScenarioParams {
 public:
  ScenarioParams() = default;
  explicit ScenarioParams(ParamMap values) : values_(std::move(values)) {}

  double operator[](const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("scenario parameter '" + key + "' was not declared");
    return it->second;
  }

  /// Parameter that must be a positive whole number.
  std::size_t count(const std::string& key) const {
    const double v = (*this)[key];
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e15)
      throw std::invalid_argument("parameter '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  long integer(const std::string& key) const {
    const double v = (*this)[key];
    if (v != std::floor(v) || std::abs(v) > 1e15)
      throw std::invalid_argument("parameter '" + key + "' must be an integer");
    return static_cast<long>(v);
  }

  const ParamMap& values() const { return values_; }

 private:
  ParamMap values_;
};

/// Numeric table written as the scenario's CSV artifact.
struct ScenarioTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ScenarioResult {
  std::string quantity;  // what `estimate` measures
  EstimateReport estimate;
  std::vector<std::pair<std::string, double>> extras;
  std::vector<std::string> notes;
  ScenarioTable table;

  double extra(const std::string& name) const {
    for (const auto& [k, v] : extras)
      if (k == name) return v;
    throw std::out_of_range("no extra value named '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Snakes and ladders

/// Squares 1..size; `jumps` maps the foot of a ladder or head of a snake to
/// its other end. A game needs the exact roll to land on `size`.
struct SnakesBoard {
  int size = 100;
  int start = 1;
  std::map<int, int> jumps;

  void validate() const {
    if (size < 2) throw std::invalid_argument("board: size must be at least 2");
    if (start < 1 || start >= size) throw std::invalid_argument("board: start must be in [1, size)");
    for (const auto& [from, to] : jumps) {
      if (from < 1 || from >= size || to < 1 || to > size || from == to)
        throw std::invalid_argument("board: jump " + std::to_string(from) + "->" + std::to_string(to) +
                                    " is outside the board or a no-op");
      if (jumps.count(to))
        throw std::invalid_argument("board: jump " + std::to_string(from) + "->" + std::to_string(to) +
                                    " lands on another jump");
    }
  }

  /// The common 100-square layout.
  static SnakesBoard classic() {
    SnakesBoard b;
    b.jumps = {{4, 14},  {9, 31},  {21, 42}, {28, 84}, {36, 44}, {51, 67}, {71, 91}, {80, 100},
               {16, 6},  {47, 26}, {49, 11}, {56, 53}, {62, 19}, {64, 60}, {87, 24}, {93, 73},
               {95, 75}, {98, 78}};
    return b;
  }
};

/// Number of rolls to finish one game.
inline long play_snakes_ladders(const SnakesBoard& board, RandomStream& stream) {
  static const auto die = fair_die();
  int pos = board.start;
  long rolls = 0;
  while (pos != board.size) {
    ++rolls;
    const int next = pos + sample_discrete(die, stream);
    if (next > board.size) continue;
    const auto it = board.jumps.find(next);
    pos = it == board.jumps.end() ? next : it->second;
  }
  return rolls;
}

// ---------------------------------------------------------------------------
// Monty Hall

/// One game: returns whether switching wins. The host opens a goat door the
/// player did not pick, choosing at random when two qualify.
inline bool monty_hall_switch_wins(RandomStream& stream) {
  auto door = [&stream](int k) { return static_cast<int>(static_cast<double>(k) * stream.next_uniform()); };
  const int car = door(3);
  const int pick = door(3);
  int opened = -1;
  if (car == pick) {
    const int skip = door(2);
    for (int d = 0, seen = 0; d < 3; ++d)
      if (d != pick && seen++ == skip) opened = d;
  } else {
    opened = 3 - car - pick;
  }
  const int switched = 3 - pick - opened;
  return switched == car;
}

// ---------------------------------------------------------------------------
// Normal-Cauchy Bayes estimator

struct RatioEstimate {
  double value;
  double sample_std;  // per-draw, linearized
  double half_width;
  std::size_t n;
};

/// delta(t) = E[X/(1+X^2)] / E[1/(1+X^2)] with X ~ N(t,1), both means over the
/// same antithetic pairs t +/- Z, so delta(0) is exactly 0.
inline RatioEstimate normal_cauchy_delta(double t, std::size_t n_pairs, RandomStream& stream,
                                         double level = 0.95) {
  if (n_pairs < 2) throw std::invalid_argument("normal_cauchy_delta: need at least 2 pairs");
  std::vector<double> a(n_pairs), b(n_pairs);
  double sa = 0.0, sb = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const double z = sample_standard_normal(stream);
    const double x1 = t + z, x2 = t - z;
    const double w1 = 1.0 / (1.0 + x1 * x1), w2 = 1.0 / (1.0 + x2 * x2);
    a[k] = 0.5 * (x1 * w1 + x2 * w2);
    b[k] = 0.5 * (w1 + w2);
    sa += a[k];
    sb += b[k];
  }
  const double value = sa / sb;
  const double mb = sb / static_cast<double>(n_pairs);
  RunningStats lin;
  for (std::size_t k = 0; k < n_pairs; ++k) lin.push((a[k] - value * b[k]) / mb);
  const double sd = lin.stddev();
  return {value, sd, z_quantile(level) * sd / std::sqrt(static_cast<double>(n_pairs)), n_pairs};
}

inline double black_scholes_call(double s0, double strike, double rate, double sigma, double maturity) {
  auto phi = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
  const double vol = sigma * std::sqrt(maturity);
  const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * maturity) / vol;
  return s0 * phi(d1) - strike * std::exp(-rate * maturity) * phi(d1 - vol);
}

// ---------------------------------------------------------------------------
// Registry

struct ScenarioContext {
  std::optional<SnakesBoard> board;
};

using ScenarioFn = std::function<ScenarioResult(const ScenarioParams&, const ScenarioContext&, const RandomStream&)>;

struct ScenarioInfo {
  std::string name;
  std::string summary;
  ParamMap defaults;
  ScenarioFn run;
};

namespace detail {

inline EstimateReport exact_report(double v, std::size_t n = 1) {
  EstimateReport r;
  r.mean = v;
  r.n = n;
  return r;
}

inline EstimateReport report_of(const std::vector<double>& xs, double level = 0.95) {
  RunningStats s;
  for (double x : xs) s.push(x);
  return make_report(s, level);
}

/// One row per replication (replication r on substream r). With one
/// replication its own report is the estimate; otherwise the estimate is the
/// mean of the replication means with a CI from their spread.
inline ScenarioResult replicate_estimate(std::size_t reps, const RandomStream& stream, double level,
                                         const std::function<EstimateReport(RandomStream&)>& one) {
  ScenarioResult res;
  res.table.columns = {"rep", "mean", "sample_std", "half_width", "n"};
  std::vector<EstimateReport> all;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream local = stream.spawn_substream(r);
    all.push_back(one(local));
    const auto& e = all.back();
    res.table.rows.push_back({static_cast<double>(r), e.mean, e.sample_std, e.half_width, static_cast<double>(e.n)});
  }
  if (reps == 1) {
    res.estimate = all.front();
  } else {
    RunningStats s;
    for (const auto& e : all) s.push(e.mean);
    res.estimate = make_report(s, level);
    res.notes.push_back("estimate pools " + std::to_string(reps) + " replication means");
  }
  return res;
}

inline ScenarioTable per_path_table(const std::string& column, const std::vector<double>& values) {
  ScenarioTable t;
  t.columns = {"rep", column};
  for (std::size_t i = 0; i < values.size(); ++i) t.rows.push_back({static_cast<double>(i), values[i]});
  return t;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Mean state of an SSA ensemble on `grid`; replication r on substream r.
struct EnsembleMean {
  std::vector<std::vector<double>> mean;  // grid x species
  std::vector<std::vector<double>> finals;
  std::size_t extinct = 0;                // runs whose total propensity hit 0 before t_final
};

inline EnsembleMean ssa_ensemble(const ReactionSystem& sys, const State& initial, double t_final,
                                 const std::vector<double>& grid, std::size_t reps, const RandomStream& stream,
                                 const std::function<void(const Trajectory<long>&)>& inspect = {}) {
  EnsembleMean out;
  const std::size_t n = initial.size();
  out.mean.assign(grid.size(), std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream local = stream.spawn_substream(r);
    const auto tr = run_ssa(sys, initial, t_final, local);
    if (inspect) inspect(tr);
    if (total_propensity(sys, tr.states.back()) == 0.0) ++out.extinct;
    const auto vals = resample_on_grid(tr, grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
      for (std::size_t i = 0; i < n; ++i) out.mean[g][i] += static_cast<double>(vals[g][i]) / static_cast<double>(reps);
    out.finals.emplace_back(tr.states.back().begin(), tr.states.back().end());
  }
  return out;
}

inline std::vector<std::vector<double>> ode_on_grid(const OdeRhs& f, const std::vector<double>& y0,
                                                    double t_final, double dt, const std::vector<double>& grid) {
  const auto tr = run_deterministic(f, y0, 0.0, t_final, dt);
  std::vector<std::vector<double>> out;
  std::size_t k = 0;
  for (double g : grid) {
    while (k + 1 < tr.size() && tr.times[k + 1] <= g + 1e-9 * dt) ++k;
    out.push_back(tr.states[k]);
  }
  return out;
}

inline State initial_state(const ScenarioParams& p, std::initializer_list<const char*> keys) {
  State s;
  for (const char* k : keys) {
    const long v = p.integer(k);
    if (v < 0) throw std::invalid_argument(std::string("parameter '") + k + "' must be non-negative");
    s.push_back(v);
  }
  return s;
}

inline ScenarioResult chain_event_result(const TransitionMatrix& p, std::size_t from, std::size_t to,
                                         std::size_t horizon, std::size_t n, const RandomStream& stream,
                                         const std::string& quantity) {
  ScenarioResult res;
  res.quantity = quantity;
  const auto pi0 = point_mass(p.size(), from);
  res.estimate = estimate_chain_event(
      pi0, p, horizon, [to, horizon](std::span<const std::size_t> xs) { return xs[horizon] == to; }, n, stream);
  res.extras.push_back({"exact", n_step_matrix(p, static_cast<long>(horizon))(from, to)});
  const auto c = classify(p);
  std::string classes;
  for (const auto& cls : c.classes) {
    classes += classes.empty() ? "{" : " {";
    for (std::size_t i = 0; i < cls.size(); ++i) classes += (i ? "," : "") + p.labels()[cls[i]];
    classes += "}";
  }
  res.notes.push_back("classes " + classes + (c.irreducible ? "; irreducible" : "; reducible") +
                      (c.aperiodic ? ", aperiodic" : ", periodic") + (c.ergodic ? ", ergodic" : ", not ergodic"));
  return res;
}

inline ScenarioResult walk_dd_scenario(std::size_t dim, const ScenarioParams& p, const RandomStream& stream) {
  const std::size_t steps = p.count("steps"), reps = p.count("reps");
  const auto dirs = symmetric_directions(dim);
  ScenarioResult res;
  res.quantity = "mean squared distance |X_t|^2";
  res.table.columns = {"rep"};
  for (std::size_t i = 0; i < dim; ++i) res.table.columns.push_back("x" + std::to_string(i + 1));
  res.table.columns.push_back("sq_dist");
  std::vector<double> sq;
  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream local = stream.spawn_substream(r);
    const auto tr = random_walk_dd(dirs, std::vector<long>(dim, 0), steps, local);
    std::vector<double> row{static_cast<double>(r)};
    double d2 = 0.0;
    for (long v : tr.states.back()) {
      row.push_back(static_cast<double>(v));
      d2 += static_cast<double>(v) * static_cast<double>(v);
    }
    row.push_back(d2);
    sq.push_back(d2);
    res.table.rows.push_back(std::move(row));
  }
  res.estimate = report_of(sq);
  res.extras.push_back({"exact", static_cast<double>(steps)});
  return res;
}

inline ScenarioResult recovery_posterior(const ScenarioParams& p, const RandomStream& stream, bool two_group) {
  const double shape = p["prior_shape"], rate = p["prior_rate"];
  const auto& g1 = recovery_times_group1();
  const auto& g2 = recovery_times_group2();
  const std::size_t d = two_group ? 2 : 1;
  LogDensityFn loglik = [&g1, &g2, two_group](std::span<const double> th) {
    double v = logpdf::exponential_sample(g1, th[0]);
    if (two_group) v += logpdf::exponential_sample(g2, th[1]);
    return v;
  };
  LogDensityFn logprior = [shape, rate, d](std::span<const double> th) {
    double v = 0.0;
    for (std::size_t i = 0; i < d; ++i) v += logpdf::gamma(th[i], shape, rate);
    return v;
  };
  Matrix sigma(d, d);
  for (std::size_t i = 0; i < d; ++i) sigma(i, i) = p["proposal_var"];
  std::vector<double> theta0(d, p["theta0"]);
  RandomStream local = stream.spawn_substream(0);
  const auto post = posterior_sample(loglik, logprior, ProposalKernel::random_walk(sigma), theta0, p.count("n"),
                                     static_cast<std::size_t>(p.integer("burn_in")), local);

  auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  const double a1 = shape + static_cast<double>(g1.size()), b1 = rate + sum(g1);
  const double a2 = shape + static_cast<double>(g2.size()), b2 = rate + sum(g2);

  ScenarioResult res;
  const auto& last = post.summary.back();
  res.quantity = two_group ? "posterior mean of group-2 recovery rate" : "posterior mean of recovery rate";
  res.estimate.mean = last.mean;
  res.estimate.sample_std = last.stddev;
  res.estimate.half_width = last.half_width;
  res.estimate.n = post.run.size() - post.run.burn_in;
  res.estimate.level = 0.95;
  if (two_group) {
    res.extras.push_back({"group1_mean", post.summary[0].mean});
    res.extras.push_back({"group1_var", post.summary[0].stddev * post.summary[0].stddev});
    res.extras.push_back({"group1_half_width", post.summary[0].half_width});
    res.extras.push_back({"group1_conjugate_mean", a1 / b1});
    res.extras.push_back({"group2_var", last.stddev * last.stddev});
    res.extras.push_back({"group2_conjugate_mean", a2 / b2});
  } else {
    res.extras.push_back({"conjugate_mean", a1 / b1});
    res.extras.push_back({"conjugate_std", std::sqrt(a1) / b1});
  }
  res.extras.push_back({"acceptance_ratio", post.run.acceptance_ratio()});
  res.notes.push_back("half_width treats post-burn-in draws as independent");
  res.table.columns = {"draw"};
  for (std::size_t i = 0; i < d; ++i) res.table.columns.push_back("theta" + std::to_string(i + 1));
  for (std::size_t i = post.run.burn_in; i < post.run.size(); ++i) {
    std::vector<double> row{static_cast<double>(i)};
    for (std::size_t j = 0; j < d; ++j) row.push_back(post.run(i, j));
    res.table.rows.push_back(std::move(row));
  }
  return res;
}

inline const ParamMap kSirDefaults{{"mu", 1e-4},    {"beta", 0.25}, {"gamma", 0.05}, {"s0", 198},
                                   {"i0", 2},       {"r0", 0},      {"t_final", 60}};

inline std::vector<ScenarioInfo> build_registry() {
  std::vector<ScenarioInfo> reg;
  auto add = [&reg](std::string name, std::string summary, ParamMap defaults, ScenarioFn fn) {
    reg.push_back({std::move(name), std::move(summary), std::move(defaults), std::move(fn)});
  };
  auto with = [](ParamMap base, const ParamMap& more) {
    for (const auto& [k, v] : more) base[k] = v;
    return base;
  };

  add("decay_deterministic", "RK4 solution of dy/dt = -lambda y",
      {{"lambda", 0.5}, {"y0", 1000}, {"t_final", 4}, {"dt", 1e-3}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream&) {
        const auto m = models::decay(p["lambda"], p.integer("y0"), p["t_final"]);
        const auto tr = run_deterministic(m.ode, {p["y0"]}, 0.0, p["t_final"], p["dt"]);
        ScenarioResult res;
        res.quantity = "y(t_final)";
        res.estimate = exact_report(tr.states.back()[0], tr.size() - 1);
        res.extras.push_back({"exact", p["y0"] * std::exp(-p["lambda"] * p["t_final"])});
        res.table.columns = {"t", "y"};
        for (std::size_t k = 0; k < tr.size(); ++k) res.table.rows.push_back({tr.times[k], tr.states[k][0]});
        return res;
      });

  add("decay_ssa", "Gillespie ensemble of first-order decay",
      {{"lambda", 0.5}, {"y0", 1000}, {"t_final", 4}, {"reps", 500}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto m = models::decay(p["lambda"], p.integer("y0"), p["t_final"]);
        ScenarioResult res;
        res.quantity = "ensemble mean y(t_final)";
        res.table.columns = {"rep", "y_final", "events"};
        std::vector<double> finals;
        for (std::size_t r = 0; r < p.count("reps"); ++r) {
          RandomStream local = stream.spawn_substream(r);
          const auto tr = run_ssa(m.system, m.initial, m.t_final, local);
          finals.push_back(static_cast<double>(tr.states.back()[0]));
          res.table.rows.push_back({static_cast<double>(r), finals.back(), static_cast<double>(tr.size() - 1)});
        }
        res.estimate = report_of(finals);
        res.extras.push_back({"exact", p["y0"] * std::exp(-p["lambda"] * p["t_final"])});
        return res;
      });

  add("mc_sin", "integral of sin over [0,1] by uniform sampling",
      {{"n", 1e5}, {"reps", 1}, {"level", 0.95}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        auto res = replicate_estimate(p.count("reps"), stream, p["level"], [&](RandomStream& s) {
          return integrate_interval([](double x) { return std::sin(x); }, 0.0, 1.0, p.count("n"), s, p["level"]);
        });
        res.quantity = "integral of sin(x) on [0,1]";
        res.extras.push_back({"exact", 1.0 - std::cos(1.0)});
        return res;
      });

  add("mc_pi", "pi as the integral of 4 sqrt(1-x^2) over [0,1]",
      {{"n", 1e6}, {"reps", 1}, {"level", 0.99}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        auto res = replicate_estimate(p.count("reps"), stream, p["level"], [&](RandomStream& s) {
          return integrate_interval([](double x) { return 4.0 * std::sqrt(1.0 - x * x); }, 0.0, 1.0, p.count("n"), s,
                                    p["level"]);
        });
        res.quantity = "pi";
        res.extras.push_back({"exact", std::numbers::pi});
        return res;
      });

  add("mc_expquad", "integral of exp(-x/2)(x^2-x) over [0,inf) via Exp(1/2) draws",
      {{"n", 1e5}, {"reps", 1}, {"level", 0.95}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        auto res = replicate_estimate(p.count("reps"), stream, p["level"], [&](RandomStream& s) {
          return estimate_mean([](double x) { return (x * x - x) / 0.5; },
                               [](RandomStream& rs) { return sample_exponential(0.5, rs); }, p.count("n"), s,
                               p["level"]);
        });
        res.quantity = "integral of exp(-x/2)(x^2-x) on [0,inf)";
        res.extras.push_back({"exact", 12.0});
        return res;
      });

  add("normal_cdf_naive", "Phi(t) as the fraction of standard normal draws <= t",
      {{"t", 0.0}, {"n", 1e6}, {"reps", 1}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        auto res = replicate_estimate(p.count("reps"), stream, 0.95, [&](RandomStream& s) {
          return estimate_tail_naive(p["t"], p.count("n"), s);
        });
        res.quantity = "Phi(t)";
        res.extras.push_back({"exact", normal_cdf(p["t"])});
        return res;
      });

  add("normal_cdf_importance", "Phi(t) for t < 0 by importance sampling with a shifted exponential",
      {{"t", -4.5}, {"n", 1e5}, {"reps", 1}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        if (!(p["t"] < 0.0)) throw std::invalid_argument("normal_cdf_importance: t must be negative");
        const auto spec = normal_tail_importance(p["t"]);
        auto res = replicate_estimate(p.count("reps"), stream, 0.95, [&](RandomStream& s) {
          return importance_estimate(spec, p.count("n"), s);
        });
        res.quantity = "Phi(t)";
        const double exact = normal_cdf(p["t"]);
        res.extras.push_back({"exact", exact});
        res.extras.push_back({"relative_error", std::abs(res.estimate.mean - exact) / exact});
        // Naive estimator at the same n on a separate substream, for the variance comparison.
        RandomStream naive_stream = stream.spawn_substream(p.count("reps"));
        const auto naive = estimate_tail_naive(p["t"], p.count("n"), naive_stream);
        const auto first = res.table.rows.front();
        res.extras.push_back({"is_variance", first[2] * first[2]});
        res.extras.push_back({"naive_mean", naive.mean});
        res.extras.push_back({"naive_variance", naive.sample_std * naive.sample_std});
        return res;
      });

  add("normal_cauchy_delta", "normal-Cauchy Bayes estimator delta(t) from shared normal draws",
      {{"t", 0.0}, {"n", 1e5}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const std::size_t n = p.count("n");
        ScenarioResult res;
        res.quantity = "delta(t)";
        RandomStream s0 = stream.spawn_substream(0);
        const auto main = normal_cauchy_delta(p["t"], n, s0);
        res.estimate.mean = main.value;
        res.estimate.sample_std = main.sample_std;
        res.estimate.half_width = main.half_width;
        res.estimate.n = main.n;
        // Pairs needed for a 95% half-width of 5e-4, i.e. three correct digits.
        auto pairs_needed = [](double sd) { return std::ceil(std::pow(1.96 * sd / 5e-4, 2.0)); };
        res.extras.push_back({"n_for_three_digits", pairs_needed(main.sample_std)});
        res.table.columns = {"t", "delta", "sample_std", "half_width", "n", "n_for_three_digits"};
        const double ts[] = {0.0, 2.0, 4.0};
        for (std::size_t i = 0; i < 3; ++i) {
          RandomStream s = stream.spawn_substream(i + 1);
          const auto e = normal_cauchy_delta(ts[i], n, s);
          res.table.rows.push_back(
              {ts[i], e.value, e.sample_std, e.half_width, static_cast<double>(n), pairs_needed(e.sample_std)});
        }
        res.notes.push_back("n counts antithetic pairs (t+Z, t-Z)");
        return res;
      });

  add("weather_chain", "three-state weather chain: distributions, stationary law, rainy-day event",
      {{"n", 1e4}, {"horizon", 5}, {"steps", 10}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto w = chains::weather();
        auto res = chain_event_result(w, 0, 2, p.count("horizon"), p.count("n"), stream,
                                      "P(rainy on day horizon | sunny on day 0)");
        const auto st = stationary_distribution(w);
        for (std::size_t j = 0; j < 3; ++j) res.extras.push_back({"stationary_" + w.labels()[j], st[j]});
        res.table.columns = {"step", "sunny", "cloudy", "rainy"};
        auto pi = point_mass(3, 1);
        for (std::size_t t = 0; t <= p.count("steps"); ++t) {
          res.table.rows.push_back({static_cast<double>(t), pi[0], pi[1], pi[2]});
          pi = step_distribution(pi, w);
        }
        res.notes.push_back("table rows are the distribution from a cloudy start");
        return res;
      });

  add("purchase_funnel", "absorbing purchase-funnel chain: purchase within horizon steps",
      {{"n", 1e4}, {"horizon", 6}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto f = chains::purchase_funnel();
        auto res = chain_event_result(f, 0, 3, p.count("horizon"), p.count("n"), stream,
                                      "P(purchased within horizon steps | browsing)");
        res.table.columns = {"step", "browsing", "cart", "checkout", "purchased"};
        auto pi = point_mass(4, 0);
        for (std::size_t t = 0; t <= p.count("horizon"); ++t) {
          res.table.rows.push_back({static_cast<double>(t), pi[0], pi[1], pi[2], pi[3]});
          pi = step_distribution(pi, f);
        }
        return res;
      });

  add("four_state_chain", "four-state chain: classification and multi-step probabilities",
      {{"n", 1e4}, {"from", 3}, {"to", 2}, {"horizon", 2}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto c = chains::four_state();
        const long from = p.integer("from"), to = p.integer("to");
        if (from < 1 || from > 4 || to < 1 || to > 4)
          throw std::invalid_argument("four_state_chain: states are numbered 1..4");
        auto res = chain_event_result(c, static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1),
                                      p.count("horizon"), p.count("n"), stream, "P(X_horizon = to | X_0 = from)");
        const auto p2 = n_step_matrix(c, 2), p3 = n_step_matrix(c, 3);
        res.table.columns = {"i", "j", "p_ij", "p2_ij", "p3_ij"};
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 4; ++j)
            res.table.rows.push_back({static_cast<double>(i + 1), static_cast<double>(j + 1), c(i, j), p2(i, j), p3(i, j)});
        return res;
      });

  add("random_walk_1d", "simple random walk on Z: moments of X_t over replications",
      {{"p", 0.5}, {"steps", 1e4}, {"reps", 200}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        WalkSpec spec;
        spec.p = p["p"];
        spec.steps = p.count("steps");
        ScenarioResult res;
        res.quantity = "mean of X_t";
        res.table.columns = {"rep", "x_t"};
        std::vector<double> xs;
        for (std::size_t r = 0; r < p.count("reps"); ++r) {
          RandomStream local = stream.spawn_substream(r);
          xs.push_back(static_cast<double>(random_walk(spec, local).states.back()[0]));
          res.table.rows.push_back({static_cast<double>(r), xs.back()});
        }
        res.estimate = report_of(xs);
        const double t = static_cast<double>(spec.steps);
        res.extras.push_back({"exact_mean", t * (2.0 * spec.p - 1.0)});
        res.extras.push_back({"sample_variance", sample_variance(xs)});
        res.extras.push_back({"exact_variance", 4.0 * t * spec.p * (1.0 - spec.p)});
        return res;
      });

  for (std::size_t dim : {2u, 3u})
    add("random_walk_" + std::to_string(dim) + "d", "symmetric walk on Z^d: mean squared distance",
        {{"steps", 1e4}, {"reps", 200}},
        [dim](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
          return walk_dd_scenario(dim, p, stream);
        });

  add("gamblers_ruin", "gambler's ruin probability from K with target T",
      {{"k", 30}, {"target", 100}, {"p", 0.5}, {"n", 1e4}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        ScenarioResult res;
        res.quantity = "P(ruin)";
        std::vector<double> ruined;
        res.estimate = gamblers_ruin(p.integer("k"), p.integer("target"), p["p"], p.count("n"), stream, 0.95, &ruined);
        res.extras.push_back({"exact", gamblers_ruin_exact(p.integer("k"), p.integer("target"), p["p"])});
        res.table = per_path_table("ruined", ruined);
        return res;
      });

  add("startup_valuation", "startup valuation walk absorbed at bankruptcy or acquisition",
      {{"delta", 2e6}, {"v0", 10e6}, {"v_max", 100e6}, {"c_operate", 10e3}, {"c_invest", 200e3}, {"p", 0.6},
       {"n", 5000}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        StartupParams prm;
        prm.delta = p["delta"];
        prm.v0 = p["v0"];
        prm.v_max = p["v_max"];
        prm.c_operate = p["c_operate"];
        prm.c_invest = p["c_invest"];
        prm.p = p["p"];
        prm.n_sims = p.count("n");
        const auto rep = startup_valuation(prm, stream);
        ScenarioResult res;
        res.quantity = "P(bankruptcy)";
        res.estimate = rep.bankruptcy;
        res.extras.push_back({"mean_duration", rep.duration.mean});
        res.extras.push_back({"duration_half_width", rep.duration.half_width});
        res.extras.push_back({"expected_profit_if_acquired", rep.expected_profit_if_acquired});
        res.extras.push_back({"expected_loss_if_bankrupt", rep.expected_loss_if_bankrupt});
        res.table.columns = {"rep", "bankrupt", "duration", "profit"};
        for (std::size_t i = 0; i < rep.runs.size(); ++i)
          res.table.rows.push_back({static_cast<double>(i), rep.runs[i].bankrupt ? 1.0 : 0.0,
                                    static_cast<double>(rep.runs[i].duration), rep.runs[i].profit});
        return res;
      });

  add("brownian_hitting", "mean exit time of Brownian motion from the box |W_i| < a",
      {{"dim", 3}, {"half_width", 1.0}, {"dt", 0.005}, {"n", 1e4}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        ScenarioResult res;
        res.quantity = "mean hitting time";
        std::vector<double> times;
        res.estimate = hitting_time_box(p.count("dim"), p["half_width"], p["dt"], p.count("n"), stream, 0.95, &times);
        res.table = per_path_table("hitting_time", times);
        res.notes.push_back("times are dt * steps, checked after each step");
        return res;
      });

  add("european_call", "European call price by Euler-Maruyama on geometric Brownian motion",
      {{"s0", 102}, {"strike", 100}, {"rate", 0.04}, {"sigma", 0.3}, {"maturity", 0.5}, {"dt", 1e-3}, {"n", 1e4}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        OptionParams prm;
        prm.s0 = p["s0"];
        prm.strike = p["strike"];
        prm.rate = p["rate"];
        prm.sigma = p["sigma"];
        prm.maturity = p["maturity"];
        prm.dt = p["dt"];
        prm.n_sims = p.count("n");
        ScenarioResult res;
        res.quantity = "discounted expected payoff";
        std::vector<double> terminal;
        res.estimate = price_european_call(prm, stream, 0.95, &terminal);
        res.table = per_path_table("s_t", terminal);
        res.extras.push_back({"black_scholes", black_scholes_call(prm.s0, prm.strike, prm.rate, prm.sigma, prm.maturity)});
        return res;
      });

  add("sir_ode", "deterministic SIR model by RK4", with(kSirDefaults, {{"dt", 0.0}, {"grid", 0.1}}),
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream&) {
        const auto m = models::sir(p["mu"], p["beta"], p["gamma"]);
        const double tf = p["t_final"];
        const double dt = p["dt"] > 0.0 ? p["dt"] : 1e-3 * tf;
        const auto tr = run_deterministic(m.ode, {p["s0"], p["i0"], p["r0"]}, 0.0, tf, dt);
        std::size_t peak = 0;
        for (std::size_t k = 1; k < tr.size(); ++k)
          if (tr.states[k][1] > tr.states[peak][1]) peak = k;
        ScenarioResult res;
        res.quantity = "peak infected";
        res.estimate = exact_report(tr.states[peak][1], tr.size() - 1);
        res.extras.push_back({"peak_time", tr.times[peak]});
        res.table.columns = {"t", "S", "I", "R"};
        const auto grid = uniform_grid(0.0, tf, p["grid"]);
        const auto vals = ode_on_grid(m.ode, {p["s0"], p["i0"], p["r0"]}, tf, dt, grid);
        for (std::size_t g = 0; g < grid.size(); ++g)
          res.table.rows.push_back({grid[g], vals[g][0], vals[g][1], vals[g][2]});
        return res;
      });

  add("sir_ssa", "stochastic SIR ensemble compared with the RK4 mean field",
      with(kSirDefaults, {{"reps", 200}, {"grid", 0.5}}),
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto m = models::sir(p["mu"], p["beta"], p["gamma"]);
        const State init = initial_state(p, {"s0", "i0", "r0"});
        const double tf = p["t_final"];
        const auto grid = uniform_grid(0.0, tf, p["grid"]);
        const auto ens = ssa_ensemble(m.system, init, tf, grid, p.count("reps"), stream);
        const auto ode = ode_on_grid(m.ode, {p["s0"], p["i0"], p["r0"]}, tf, 1e-3 * tf, grid);
        ScenarioResult res;
        res.quantity = "peak of ensemble-mean infected";
        std::size_t peak = 0;
        double linf = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
          if (ens.mean[g][1] > ens.mean[peak][1]) peak = g;
          linf = std::max(linf, std::abs(ens.mean[g][1] - ode[g][1]));
        }
        res.estimate = exact_report(ens.mean[peak][1], p.count("reps"));
        res.extras.push_back({"peak_time", grid[peak]});
        res.extras.push_back({"linf_infected_vs_ode", linf});
        res.extras.push_back({"extinct_runs", static_cast<double>(ens.extinct)});
        res.table.columns = {"t", "S_mean", "I_mean", "R_mean", "S_ode", "I_ode", "R_ode"};
        for (std::size_t g = 0; g < grid.size(); ++g)
          res.table.rows.push_back({grid[g], ens.mean[g][0], ens.mean[g][1], ens.mean[g][2], ode[g][0], ode[g][1], ode[g][2]});
        return res;
      });

  add("michaelis_menten", "Michaelis-Menten SSA ensemble with conservation checks",
      {{"c1", 0.002}, {"c2", 0.1}, {"c3", 0.75}, {"s0", 200}, {"e0", 300}, {"c0", 100}, {"p0", 50},
       {"t_final", 50}, {"reps", 100}, {"grid", 0.5}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto m = models::michaelis_menten(p["c1"], p["c2"], p["c3"]);
        const State init = initial_state(p, {"s0", "e0", "c0", "p0"});
        const long enzyme = init[1] + init[2], substrate = init[0] + init[2] + init[3];
        std::size_t events = 0, violations = 0;
        const auto grid = uniform_grid(0.0, p["t_final"], p["grid"]);
        const auto ens = ssa_ensemble(m.system, init, p["t_final"], grid, p.count("reps"), stream,
                                      [&](const Trajectory<long>& tr) {
                                        for (const auto& s : tr.states) {
                                          ++events;
                                          if (s[1] + s[2] != enzyme || s[0] + s[2] + s[3] != substrate) ++violations;
                                        }
                                      });
        std::vector<double> finals;
        for (const auto& f : ens.finals) finals.push_back(f[3]);
        ScenarioResult res;
        res.quantity = "mean product P(t_final)";
        res.estimate = report_of(finals);
        res.extras.push_back({"states_checked", static_cast<double>(events)});
        res.extras.push_back({"conservation_violations", static_cast<double>(violations)});
        res.table.columns = {"t", "S_mean", "E_mean", "C_mean", "P_mean"};
        for (std::size_t g = 0; g < grid.size(); ++g)
          res.table.rows.push_back({grid[g], ens.mean[g][0], ens.mean[g][1], ens.mean[g][2], ens.mean[g][3]});
        return res;
      });

  add("lotka_volterra", "Lotka-Volterra predator-prey SSA ensemble and mean field",
      {{"alpha", 1.0}, {"beta", 0.005}, {"gamma", 0.6}, {"f0", 50}, {"r0", 100}, {"t_final", 30}, {"reps", 20},
       {"grid", 0.1}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        const auto m = models::lotka_volterra(p["alpha"], p["beta"], p["gamma"]);
        const State init = initial_state(p, {"f0", "r0"});
        const double tf = p["t_final"];
        const auto grid = uniform_grid(0.0, tf, p["grid"]);
        const auto ens = ssa_ensemble(m.system, init, tf, grid, p.count("reps"), stream);
        const auto ode = ode_on_grid(m.ode, {p["f0"], p["r0"]}, tf, 1e-3 * tf, grid);
        std::vector<double> finals;
        for (const auto& f : ens.finals) finals.push_back(f[0]);
        ScenarioResult res;
        res.quantity = "mean predators F(t_final)";
        res.estimate = report_of(finals);
        res.extras.push_back({"extinct_runs", static_cast<double>(ens.extinct)});
        res.table.columns = {"t", "F_mean", "R_mean", "F_ode", "R_ode"};
        for (std::size_t g = 0; g < grid.size(); ++g)
          res.table.rows.push_back({grid[g], ens.mean[g][0], ens.mean[g][1], ode[g][0], ode[g][1]});
        return res;
      });

  add("mh_bivariate", "random-walk Metropolis-Hastings on the bivariate example density",
      {{"n", 1e6}, {"burn_in", 1000}, {"proposal_var", 4.0}, {"x0", 0.0}, {"y0", 0.0}, {"thin", 100}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        RandomStream local = stream.spawn_substream(0);
        const double v = p["proposal_var"];
        const auto run = mh_chain({bivariate_example_log_density, 2},
                                  ProposalKernel::random_walk(Matrix{{v, 0.0}, {0.0, v}}), {p["x0"], p["y0"]},
                                  p.count("n"), local, static_cast<std::size_t>(p.integer("burn_in")));
        const auto sum = summarize(run);
        ScenarioResult res;
        res.quantity = "E_f(X1)";
        res.estimate.mean = sum[0].mean;
        res.estimate.sample_std = sum[0].stddev;
        res.estimate.half_width = sum[0].half_width;
        res.estimate.n = run.size() - run.burn_in;
        res.extras.push_back({"mean_x2", sum[1].mean});
        res.extras.push_back({"var_x1", sum[0].stddev * sum[0].stddev});
        res.extras.push_back({"acceptance_ratio", run.acceptance_ratio()});
        res.extras.push_back({"reference", 1.85997});
        res.notes.push_back("half_width treats post-burn-in draws as independent");
        res.table.columns = {"draw", "x1", "x2"};
        for (std::size_t i = run.burn_in; i < run.size(); i += p.count("thin"))
          res.table.rows.push_back({static_cast<double>(i), run(i, 0), run(i, 1)});
        return res;
      });

  add("recovery_rate", "posterior of an exponential recovery rate under a Gamma prior",
      {{"n", 1e4}, {"burn_in", 1000}, {"proposal_var", 0.25}, {"theta0", 0.5}, {"prior_shape", 2}, {"prior_rate", 1}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        return recovery_posterior(p, stream, false);
      });

  add("recovery_two_group", "joint posterior of two groups' recovery rates",
      {{"n", 1e5}, {"burn_in", 10000}, {"proposal_var", 0.2}, {"theta0", 1.0}, {"prior_shape", 2}, {"prior_rate", 1}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        return recovery_posterior(p, stream, true);
      });

  add("portfolio_var", "posterior predictive probability of a large portfolio loss",
      {{"s0", 1e6}, {"threshold", 9e5}, {"horizon", 0.5}, {"dt", 0.01}, {"n_mh", 10000}, {"burn_in", 2000},
       {"thin_to", 100}, {"n_mc", 1000}, {"tau_mu", 0.001}, {"tau_sigma", 0.001}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        VarConfig cfg;
        cfg.s0 = p["s0"];
        cfg.loss_threshold = p["threshold"];
        cfg.horizon = p["horizon"];
        cfg.dt = p["dt"];
        cfg.n_mh = p.count("n_mh");
        cfg.burn_in = static_cast<std::size_t>(p.integer("burn_in"));
        cfg.thin_to = p.count("thin_to");
        cfg.n_mc = p.count("n_mc");
        cfg.tau_mu = p["tau_mu"];
        cfg.tau_sigma = p["tau_sigma"];
        RandomStream local = stream.spawn_substream(0);
        const auto rep = var_portfolio_study(portfolio_returns(), cfg, local);
        ScenarioResult res;
        res.quantity = "P(S_T < threshold)";
        res.estimate = rep.loss_probability;
        res.extras.push_back({"posterior_mu", rep.posterior[0].mean});
        res.extras.push_back({"posterior_sigma", rep.posterior[1].mean});
        res.extras.push_back({"acceptance_ratio", rep.acceptance_ratio});
        res.table.columns = {"draw", "loss_probability"};
        for (std::size_t i = 0; i < rep.per_draw_loss.size(); ++i)
          res.table.rows.push_back({static_cast<double>(i), rep.per_draw_loss[i]});
        return res;
      });

  add("monty_hall", "Monty Hall game: win probability when switching", {{"n", 1e5}},
      [](const ScenarioParams& p, const ScenarioContext&, const RandomStream& stream) {
        RandomStream local = stream.spawn_substream(0);
        RunningStats sw, stay;
        for (std::size_t k = 0; k < p.count("n"); ++k) {
          const bool win = monty_hall_switch_wins(local);
          sw.push(win ? 1.0 : 0.0);
          stay.push(win ? 0.0 : 1.0);
        }
        ScenarioResult res;
        res.quantity = "P(win | switch)";
        res.estimate = make_report(sw, 0.95);
        const auto st = make_report(stay, 0.95);
        res.extras.push_back({"exact", 2.0 / 3.0});
        res.extras.push_back({"stay_win", st.mean});
        res.table.columns = {"switch", "win_probability", "half_width"};
        res.table.rows.push_back({0.0, st.mean, st.half_width});
        res.table.rows.push_back({1.0, res.estimate.mean, res.estimate.half_width});
        return res;
      });

  add("snakes_ladders", "number of rolls to finish a snakes-and-ladders board", {{"n", 1e4}, {"k", 30}},
      [](const ScenarioParams& p, const ScenarioContext& ctx, const RandomStream& stream) {
        const SnakesBoard board = ctx.board ? *ctx.board : SnakesBoard::classic();
        board.validate();
        const long k = p.integer("k");
        RandomStream local = stream.spawn_substream(0);
        std::map<long, std::size_t> counts;
        std::vector<double> rolls;
        for (std::size_t i = 0; i < p.count("n"); ++i) {
          rolls.push_back(static_cast<double>(play_snakes_ladders(board, local)));
          ++counts[static_cast<long>(rolls.back())];
        }
        const double n = static_cast<double>(rolls.size());
        double eq = 0.0, le = 0.0;
        for (const auto& [r, c] : counts) {
          if (r == k) eq += static_cast<double>(c) / n;
          if (r <= k) le += static_cast<double>(c) / n;
        }
        ScenarioResult res;
        res.quantity = "E[rolls]";
        res.estimate = report_of(rolls);
        res.extras.push_back({"p_equal_k", eq});
        res.extras.push_back({"p_at_most_k", le});
        res.notes.push_back(ctx.board ? "board from file" : "built-in classic board");
        res.table.columns = {"rolls", "count"};
        for (const auto& [r, c] : counts) res.table.rows.push_back({static_cast<double>(r), static_cast<double>(c)});
        return res;
      });

  std::sort(reg.begin(), reg.end(), [](const ScenarioInfo& a, const ScenarioInfo& b) { return a.name < b.name; });
  return reg;
}

}  // namespace detail

inline const std::vector<ScenarioInfo>& scenario_registry() {
  static const std::vector<ScenarioInfo> reg = detail::build_registry();
  return reg;
}

inline std::vector<std::string> scenario_names() {
  std::vector<std::string> out;
  for (const auto& s : scenario_registry()) out.push_back(s.name);
  return out;
}

/// Throws std::invalid_argument naming every known scenario.
inline const ScenarioInfo& find_scenario(const std::string& name) {
  for (const auto& s : scenario_registry())
    if (s.name == name) return s;
  std::string known;
  for (const auto& s : scenario_registry()) known += (known.empty() ? "" : ", ") + s.name;
  throw std::invalid_argument("unknown scenario '" + name + "'; known scenarios: " + known);
}

/// Overlays `given` on the scenario's defaults; unknown keys are rejected.
inline ScenarioParams resolve_params(const ScenarioInfo& info, const ParamMap& given) {
  ParamMap values = info.defaults;
  for (const auto& [k, v] : given) {
    if (!info.defaults.count(k)) {
      std::string known;
      for (const auto& [dk, dv] : info.defaults) known += (known.empty() ? "" : ", ") + dk;
      throw std::invalid_argument("scenario '" + info.name + "' has no parameter '" + k + "'; parameters: " + known);
    }
    if (!std::isfinite(v)) throw std::invalid_argument("parameter '" + k + "' must be finite");
    values[k] = v;
  }
  return ScenarioParams(std::move(values));
}

inline ScenarioResult run_scenario(const std::string& name, const ParamMap& given, const RandomStream& stream,
                                   const ScenarioContext& ctx = {}) {
  const auto& info = find_scenario(name);
  return info.run(resolve_params(info, given), ctx, stream);
}

}  // namespace simlab
