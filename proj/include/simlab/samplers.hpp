#pragma once

// Random variates from a RandomStream: inverse transform, acceptance-
// rejection, Box-Muller and Cholesky-based multivariate normals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/linalg.hpp"
#include "simlab/rng.hpp"

namespace simlab {

using InverseCdf = std::function<double(double)>;
using Density = std::function<double(double)>;
using ScalarSampler = std::function<double(RandomStream&)>;

// ---------------------------------------------------------------------------
// Exponential

/// -ln(1-u)/rate. Increasing in u and finite for u in [0,1).
inline double exponential_from_uniform(double rate, double u) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
  return -std::log1p(-u) / rate;
}

inline double sample_exponential(double rate, RandomStream& stream) {
  if (!(rate > 0.0)) throw std::invalid_argument("sample_exponential: rate must be positive");
  return exponential_from_uniform(rate, stream.next_uniform());
}

// ---------------------------------------------------------------------------
// Discrete distributions

/// Index selected by the stepwise-cdf rule: smallest k with u <= F_k,
/// skipping zero-mass states. `cumulative` and `probs` have equal length.
inline std::size_t discrete_index(std::span<const double> cumulative,
                                  std::span<const double> probs, double u) {
  const std::size_t m = cumulative.size();
  auto k = static_cast<std::size_t>(
      std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
  while (k < m && probs[k] == 0.0) ++k;
  if (k == m) {
    // u above the last partial sum through rounding: take the last state with mass.
    k = m - 1;
    while (k > 0 && probs[k] == 0.0) --k;
  }
  return k;
}

/// Finite distribution over ordered states x_1 < ... < x_m.
template <class T>
class DiscreteDistribution {
 public:
  DiscreteDistribution(std::vector<T> states, std::vector<double> probs)
      : states_(std::move(states)), probs_(std::move(probs)) {
    if (states_.empty() || states_.size() != probs_.size())
      throw std::invalid_argument("DiscreteDistribution: states and probs must be non-empty and equal length");
    for (std::size_t i = 1; i < states_.size(); ++i)
      if (!(states_[i - 1] < states_[i]))
        throw std::invalid_argument("DiscreteDistribution: states must be strictly increasing");
    double total = 0.0;
    cumulative_.reserve(probs_.size());
    for (double p : probs_) {
      if (!(p >= 0.0)) throw std::invalid_argument("DiscreteDistribution: negative probability");
      total += p;
      cumulative_.push_back(total);
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteDistribution: probabilities must sum to 1 (got " +
                                  std::to_string(total) + ")");
  }

  /// Sorts (state, prob) pairs by state first; for state sets with no
  /// natural listing order, e.g. walk directions.
  static DiscreteDistribution sorted(std::vector<T> states, std::vector<double> probs) {
    if (states.size() != probs.size())
      throw std::invalid_argument("DiscreteDistribution: states and probs must be equal length");
    std::vector<std::size_t> order(states.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return states[a] < states[b]; });
    std::vector<T> s;
    std::vector<double> p;
    for (std::size_t i : order) {
      s.push_back(states[i]);
      p.push_back(probs[i]);
    }
    return DiscreteDistribution(std::move(s), std::move(p));
  }

  const std::vector<T>& states() const { return states_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  std::size_t size() const { return states_.size(); }

  std::size_t index_for(double u) const { return discrete_index(cumulative_, probs_, u); }
  const T& value_for(double u) const { return states_[index_for(u)]; }

 private:
  std::vector<T> states_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

template <class T>
const T& sample_discrete(const DiscreteDistribution<T>& dist, RandomStream& stream) {
  return dist.value_for(stream.next_uniform());
}

template <class T>
std::size_t sample_discrete_index(const DiscreteDistribution<T>& dist, RandomStream& stream) {
  return dist.index_for(stream.next_uniform());
}

/// Fair die {1,...,6}.
inline DiscreteDistribution<int> fair_die() {
  return {{1, 2, 3, 4, 5, 6}, std::vector<double>(6, 1.0 / 6.0)};
}

/// 1 with probability p.
inline int sample_bernoulli(double p, RandomStream& stream) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_bernoulli: p must lie in [0,1]");
  return stream.next_uniform() < p ? 1 : 0;
}

/// Sum of n Bernoulli(p) draws.
inline long sample_binomial_bernoulli_sum(long n, double p, RandomStream& stream) {
  if (n < 0) throw std::invalid_argument("sample_binomial: n must be non-negative");
  long total = 0;
  for (long i = 0; i < n; ++i) total += sample_bernoulli(p, stream);
  return total;
}

// ---------------------------------------------------------------------------
// Inverse transform

inline double sample_inverse_transform(const InverseCdf& cdf_inverse, RandomStream& stream) {
  return cdf_inverse(stream.next_open_uniform());
}

enum class OrderStatistic { min, max };

/// max of n iid draws: F^{-1}(U^{1/n}); min: F^{-1}(1 - U^{1/n}).
inline double ordered_statistic_from_uniform(const InverseCdf& cdf_inverse, long n,
                                             OrderStatistic which, double u) {
  if (n < 1) throw std::invalid_argument("ordered statistic: n must be >= 1");
  const double root = std::pow(u, 1.0 / static_cast<double>(n));
  return cdf_inverse(which == OrderStatistic::max ? root : 1.0 - root);
}

inline double sample_ordered_statistic(const InverseCdf& cdf_inverse, long n,
                                       OrderStatistic which, RandomStream& stream) {
  if (n < 1) throw std::invalid_argument("sample_ordered_statistic: n must be >= 1");
  return ordered_statistic_from_uniform(cdf_inverse, n, which, stream.next_open_uniform());
}

/// Closed-form inverse cdfs shipped with the library.
namespace inverse {

/// pdf 2x on [0,1].
inline InverseCdf linear_pdf() {
  return [](double u) { return std::sqrt(u); };
}

inline InverseCdf exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
  return [rate](double u) { return -std::log1p(-u) / rate; };
}

/// Weibull with shape alpha and scale lambda: lambda * (-ln(1-u))^{1/alpha}.
inline InverseCdf weibull(double shape, double scale) {
  if (!(shape > 0.0 && scale > 0.0))
    throw std::invalid_argument("weibull: shape and scale must be positive");
  return [shape, scale](double u) { return scale * std::pow(-std::log1p(-u), 1.0 / shape); };
}

/// pdf sin(x)/2 on [0, pi]; F(x) = (1 - cos x)/2.
inline InverseCdf sine() {
  return [](double u) { return std::acos(1.0 - 2.0 * u); };
}

/// Beta(alpha, 1): u^{1/alpha}.
inline InverseCdf beta_alpha_one(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("beta_alpha_one: alpha must be positive");
  return [alpha](double u) { return std::pow(u, 1.0 / alpha); };
}

/// Beta(1, beta): 1 - (1-u)^{1/beta}.
inline InverseCdf beta_one_beta(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta_one_beta: beta must be positive");
  return [beta](double u) { return 1.0 - std::pow(1.0 - u, 1.0 / beta); };
}

inline InverseCdf uniform(double a, double b) {
  if (!(a < b)) throw std::invalid_argument("uniform: require a < b");
  return [a, b](double u) { return a + (b - a) * u; };
}

}  // namespace inverse

// ---------------------------------------------------------------------------
// Acceptance-rejection

struct EnvelopeSpec {
  Density target_pdf;
  Density proposal_pdf;
  double constant = 1.0;
  ScalarSampler proposal_sampler;
};

struct AcceptRejectDraw {
  double value;
  std::size_t trials;  // proposals used, >= 1
};

/// Propose X ~ g, draw U, accept when U <= f(X)/(C g(X)). Throws model_error
/// if an evaluated point has f(X) > C g(X).
inline AcceptRejectDraw sample_accept_reject(const EnvelopeSpec& env, RandomStream& stream) {
  if (!(env.constant >= 1.0)) throw std::invalid_argument("accept_reject: C must be >= 1");
  for (std::size_t trials = 1;; ++trials) {
    const double x = env.proposal_sampler(stream);
    const double fx = env.target_pdf(x);
    const double bound = env.constant * env.proposal_pdf(x);
    if (fx > bound * (1.0 + 1e-12))
      throw model_error("accept_reject: envelope violated at x = " + std::to_string(x) +
                        " (f = " + std::to_string(fx) + ", C*g = " + std::to_string(bound) + ")");
    const double u = stream.next_uniform();
    if (u * bound <= fx) return {x, trials};
  }
}

/// Semicircle pdf (2/(pi R^2)) sqrt(R^2 - x^2) under a uniform proposal on
/// [-R, R] with C = 4/pi.
inline EnvelopeSpec semicircle_envelope(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("semicircle: radius must be positive");
  EnvelopeSpec env;
  env.target_pdf = [radius](double x) {
    const double r2 = radius * radius;
    return x * x < r2 ? 2.0 / (std::numbers::pi * r2) * std::sqrt(r2 - x * x) : 0.0;
  };
  env.proposal_pdf = [radius](double x) {
    return (x >= -radius && x <= radius) ? 1.0 / (2.0 * radius) : 0.0;
  };
  env.constant = 4.0 / std::numbers::pi;
  env.proposal_sampler = [radius](RandomStream& s) { return s.uniform_on(-radius, radius); };
  return env;
}

/// pdf 2x on [0,1] under the uniform proposal, C = 2.
inline EnvelopeSpec linear_pdf_envelope() {
  EnvelopeSpec env;
  env.target_pdf = [](double x) { return (x >= 0.0 && x <= 1.0) ? 2.0 * x : 0.0; };
  env.proposal_pdf = [](double x) { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; };
  env.constant = 2.0;
  env.proposal_sampler = [](RandomStream& s) { return s.next_uniform(); };
  return env;
}

// ---------------------------------------------------------------------------
// Normal variates

/// Box-Muller cosine branch. u2 must lie in (0,1].
inline double box_muller(double u1, double u2) {
  return std::sqrt(-2.0 * std::log(u2)) * std::cos(2.0 * std::numbers::pi * u1);
}

/// Both Box-Muller variates (cosine, sine) from one pair of uniforms.
inline std::pair<double, double> sample_standard_normal_pair(RandomStream& stream) {
  const double u1 = stream.next_uniform();
  const double u2 = 1.0 - stream.next_uniform();  // (0,1]: keeps the log finite
  const double r = std::sqrt(-2.0 * std::log(u2));
  const double theta = 2.0 * std::numbers::pi * u1;
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Two uniforms per draw; the sine twin is discarded.
inline double sample_standard_normal(RandomStream& stream) {
  const double u1 = stream.next_uniform();
  const double u2 = 1.0 - stream.next_uniform();
  return box_muller(u1, u2);
}

inline double sample_normal(double mean, double stddev, RandomStream& stream) {
  return mean + stddev * sample_standard_normal(stream);
}

/// Standard normal by acceptance-rejection of |Z| under an Exp(1) envelope
/// with C = sqrt(2e/pi), then a Bernoulli(1/2) sign. Each round draws the
/// proposal V2 and V1 ~ Exp(1) and accepts when V1 >= (V2 - 1)^2 / 2.
inline AcceptRejectDraw sample_normal_ar(RandomStream& stream) {
  for (std::size_t trials = 1;; ++trials) {
    const double v2 = sample_exponential(1.0, stream);
    const double v1 = sample_exponential(1.0, stream);
    if (v1 >= 0.5 * (v2 - 1.0) * (v2 - 1.0)) {
      const bool negative = sample_bernoulli(0.5, stream) == 1;
      return {negative ? -v2 : v2, trials};
    }
  }
}

/// Classical normal approximation to Binomial(n, p): round(np + sqrt(np(1-p)) Z),
/// clamped to [0, n].
inline long sample_binomial_normal_approx(long n, double p, RandomStream& stream) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("sample_binomial_normal_approx: need n >= 0 and p in [0,1]");
  const double np = static_cast<double>(n) * p;
  const double x = std::round(np + std::sqrt(np * (1.0 - p)) * sample_standard_normal(stream));
  return static_cast<long>(std::clamp(x, 0.0, static_cast<double>(n)));
}

// ---------------------------------------------------------------------------
// Poisson (used by tau-leaping)

/// Inversion by sequential search for mean < 30, Hormann's PTRS transformed
/// rejection above.
inline long sample_poisson(double mean, RandomStream& stream) {
  if (!(mean >= 0.0) || !std::isfinite(mean))
    throw std::invalid_argument("sample_poisson: mean must be finite and non-negative");
  if (mean == 0.0) return 0;
  if (mean < 30.0) {
    const double u = stream.next_uniform();
    double p = std::exp(-mean);
    double cdf = p;
    long k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;  // cdf saturated below u through rounding
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = stream.next_uniform() - 0.5;
    const double v = 1.0 - stream.next_uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<long>(k);
  }
}

// ---------------------------------------------------------------------------
// Multivariate normal

/// Mean vector and covariance with its lower Cholesky factor. Construction
/// throws numerical_error when the covariance is not symmetric positive
/// definite.
class MultiNormalSpec {
 public:
  MultiNormalSpec(std::vector<double> mean, Matrix covariance)
      : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
      throw std::invalid_argument("MultiNormalSpec: covariance must be d x d with d = mean size");
    factor_ = cholesky(covariance_);
  }

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& factor() const { return factor_; }

 private:
  std::vector<double> mean_;
  Matrix covariance_;
  Matrix factor_;
};

/// mu + B z for one vector z of iid standard normals drawn in component order.
inline std::vector<double> sample_multivariate_normal(const MultiNormalSpec& spec,
                                                      RandomStream& stream) {
  const std::size_t d = spec.dim();
  std::vector<double> z(d);
  for (auto& zi : z) zi = sample_standard_normal(stream);
  std::vector<double> x(spec.mean());
  const Matrix& b = spec.factor();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) x[i] += b(i, k) * z[k];
  return x;
}

inline std::vector<std::vector<double>> sample_multivariate_normal(const MultiNormalSpec& spec,
                                                                   std::size_t n,
                                                                   RandomStream& stream) {
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_multivariate_normal(spec, stream));
  return out;
}

}  // namespace simlab
