#pragma once

// Monte Carlo estimators with normal-theory confidence intervals.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"
#include "simlab/stats.hpp"

namespace simlab {

using RealFn = std::function<double(double)>;

struct EstimateReport {
  double mean = 0.0;
  double sample_std = 0.0;  // s_N, divisor n-1
  std::size_t n = 0;
  double level = 0.95;
  double half_width = 0.0;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
  bool covers(double value) const { return lower() <= value && value <= upper(); }
};

namespace detail {

// Acklam's rational approximation to the standard normal quantile followed
// by one Halley step against erfc.
inline double normal_quantile_rational(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549671248494919e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double normal_quantile(double p) {
  const double x = normal_quantile_rational(p);
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

/// Two-sided z_{1-alpha/2} for confidence level 1-alpha. The usual levels
/// return the tabulated values.
inline double z_quantile(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("z_quantile: level must lie in (0,1)");
  if (level == 0.90) return 1.645;
  if (level == 0.95) return 1.96;
  if (level == 0.99) return 2.576;
  if (level == 0.999) return 3.29;
  return detail::normal_quantile(1.0 - (1.0 - level) / 2.0);
}

inline EstimateReport make_report(const RunningStats& stats, double level) {
  EstimateReport r;
  r.mean = stats.mean();
  r.sample_std = stats.stddev();
  r.n = stats.count();
  r.level = level;
  r.half_width = z_quantile(level) * r.sample_std / std::sqrt(static_cast<double>(r.n));
  return r;
}

/// Mean of g(X_k) for n draws X_k from `sampler`.
inline EstimateReport estimate_mean(const RealFn& g, const ScalarSampler& sampler,
                                    std::size_t n, RandomStream& stream, double level = 0.95) {
  if (n < 2) throw std::invalid_argument("estimate_mean: n must be >= 2");
  RunningStats s;
  for (std::size_t k = 0; k < n; ++k) s.push(g(sampler(stream)));
  return make_report(s, level);
}

/// Same estimate split over `shards` substreams of `stream`, one thread per
/// shard, pooled afterwards. Deterministic for fixed (seed, shards).
inline EstimateReport estimate_mean_sharded(const RealFn& g, const ScalarSampler& sampler,
                                            std::size_t n, std::size_t shards,
                                            const RandomStream& stream, double level = 0.95) {
  if (n < 2) throw std::invalid_argument("estimate_mean_sharded: n must be >= 2");
  if (shards == 0) throw std::invalid_argument("estimate_mean_sharded: shards must be positive");
  std::vector<RunningStats> parts(shards);
  {
    std::vector<std::jthread> workers;
    workers.reserve(shards);
    for (std::size_t w = 0; w < shards; ++w) {
      const std::size_t count = n / shards + (w < n % shards ? 1 : 0);
      workers.emplace_back([&, w, count] {
        RandomStream local = stream.spawn_substream(w);
        for (std::size_t k = 0; k < count; ++k) parts[w].push(g(sampler(local)));
      });
    }
  }
  RunningStats pooled;
  for (const auto& p : parts) pooled.merge(p);
  return make_report(pooled, level);
}

/// (b-a) times the mean of g over U(a,b).
inline EstimateReport integrate_interval(const RealFn& g, double a, double b, std::size_t n,
                                         RandomStream& stream, double level = 0.95) {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw std::invalid_argument("integrate_interval: bounds must be finite");
  if (!(a < b)) throw std::invalid_argument("integrate_interval: require a < b");
  const double width = b - a;
  EstimateReport r = estimate_mean(
      g, [a, b](RandomStream& s) { return s.uniform_on(a, b); }, n, stream, level);
  r.mean *= width;
  r.sample_std *= width;
  r.half_width *= width;
  return r;
}

struct ImportanceSpec {
  Density target_pdf;       // f, possibly unnormalized when self_normalized
  Density envelope_pdf;     // l
  RealFn performance;       // g
  ScalarSampler envelope_sampler;
  bool self_normalized = false;
};

/// Plain form: mean of g(X) f(X)/l(X) with X ~ l. Self-normalized form:
/// sum w g / sum w, with a delta-method standard deviation. Throws
/// model_error when a drawn point has g f != 0 but l = 0.
inline EstimateReport importance_estimate(const ImportanceSpec& spec, std::size_t n,
                                          RandomStream& stream, double level = 0.95) {
  if (n < 2) throw std::invalid_argument("importance_estimate: n must be >= 2");
  auto weight_and_value = [&](double x, double& w, double& gx) {
    const double fx = spec.target_pdf(x);
    const double lx = spec.envelope_pdf(x);
    gx = spec.performance(x);
    if (!(lx > 0.0)) {
      if (gx * fx != 0.0)
        throw model_error("importance_estimate: envelope vanishes at x = " + std::to_string(x) +
                          " where g*f != 0");
      w = 0.0;
      return;
    }
    w = fx / lx;
  };

  if (!spec.self_normalized) {
    RunningStats s;
    for (std::size_t k = 0; k < n; ++k) {
      double w = 0.0, gx = 0.0;
      weight_and_value(spec.envelope_sampler(stream), w, gx);
      s.push(w == 0.0 ? 0.0 : gx * w);
    }
    return make_report(s, level);
  }

  std::vector<double> ws(n), gs(n);
  double sum_w = 0.0, sum_wg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    weight_and_value(spec.envelope_sampler(stream), ws[k], gs[k]);
    sum_w += ws[k];
    sum_wg += ws[k] * gs[k];
  }
  if (!(sum_w > 0.0)) throw numerical_error("importance_estimate: all weights are zero");
  const double est = sum_wg / sum_w;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = ws[k] * (gs[k] - est);
    acc += d * d;
  }
  const double nd = static_cast<double>(n);
  EstimateReport r;
  r.mean = est;
  r.sample_std = std::sqrt(nd * acc) / sum_w * std::sqrt(nd / (nd - 1.0));
  r.n = n;
  r.level = level;
  r.half_width = z_quantile(level) * r.sample_std / std::sqrt(nd);
  return r;
}

/// Indicator-mean estimate of Phi(t) from standard normal draws.
inline EstimateReport estimate_tail_naive(double t, std::size_t n, RandomStream& stream,
                                          double level = 0.95) {
  if (n < 2) throw std::invalid_argument("estimate_tail_naive: n must be >= 2");
  RunningStats s;
  for (std::size_t k = 0; k < n; ++k) s.push(sample_standard_normal(stream) <= t ? 1.0 : 0.0);
  return make_report(s, level);
}

/// Importance sampler for Phi(t), t < 0, with the shifted exponential
/// envelope l(x) = exp(x - t) on (-inf, t].
inline ImportanceSpec normal_tail_importance(double t) {
  ImportanceSpec spec;
  spec.target_pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  spec.envelope_pdf = [t](double x) { return x <= t ? std::exp(x - t) : 0.0; };
  spec.performance = [t](double x) { return x <= t ? 1.0 : 0.0; };
  spec.envelope_sampler = [t](RandomStream& s) { return t - sample_exponential(1.0, s); };
  return spec;
}

// ---------------------------------------------------------------------------
// Convergence study

struct IntegrationProblem {
  RealFn integrand;
  double a = 0.0;
  double b = 1.0;
  double exact = 0.0;
};

/// Composite mid-point rule with n cells, compensated summation so the
/// rounding floor stays well below the O(n^-2) truncation error.
inline double midpoint_rule(const RealFn& g, double a, double b, std::size_t n) {
  if (n == 0) throw std::invalid_argument("midpoint_rule: n must be positive");
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.0, comp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double term = g(a + (static_cast<double>(k) + 0.5) * h);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return (sum + comp) * h;
}

struct ConvergenceRow {
  std::size_t n;
  double mc_error;        // mean |error| over replications
  double midpoint_error;  // |error| of the deterministic rule
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  bool has_slope = false;
  double mc_slope = 0.0;
  double midpoint_slope = 0.0;
};

/// Replication r at grid index i uses substream i*replications + r.
inline ConvergenceTable convergence_study(const IntegrationProblem& problem,
                                          const std::vector<std::size_t>& n_grid,
                                          std::size_t replications, const RandomStream& stream) {
  if (n_grid.empty()) throw std::invalid_argument("convergence_study: empty n grid");
  if (replications == 0) throw std::invalid_argument("convergence_study: replications must be positive");
  ConvergenceTable table;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const std::size_t n = n_grid[i];
    if (n < 2) throw std::invalid_argument("convergence_study: every n must be >= 2");
    double err = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      RandomStream rs = stream.spawn_substream(i * replications + r);
      const auto rep = integrate_interval(problem.integrand, problem.a, problem.b, n, rs);
      err += std::abs(rep.mean - problem.exact);
    }
    const double mid = midpoint_rule(problem.integrand, problem.a, problem.b, n);
    table.rows.push_back({n, err / static_cast<double>(replications), std::abs(mid - problem.exact)});
  }
  if (table.rows.size() >= 2) {
    std::vector<double> ns, mc, mp;
    for (const auto& row : table.rows) {
      ns.push_back(static_cast<double>(row.n));
      mc.push_back(row.mc_error);
      mp.push_back(row.midpoint_error);
    }
    table.has_slope = true;
    table.mc_slope = loglog_slope(ns, mc);
    table.midpoint_slope = loglog_slope(ns, mp);
  }
  return table;
}

}  // namespace simlab
