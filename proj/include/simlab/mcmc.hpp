#pragma once

// Metropolis-Hastings on log densities, with the Bayesian studies built on it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/linalg.hpp"
#include "simlab/markov.hpp"
#include "simlab/montecarlo.hpp"
#include "simlab/processes.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"
#include "simlab/stats.hpp"

namespace simlab {

using LogDensityFn = std::function<double(std::span<const double>)>;

struct TargetDensity {
  LogDensityFn log_density;  // unnormalized; -inf outside the support
  std::size_t dim = 1;
};

enum class ProposalKind { random_walk, independence };

struct ProposalKernel {
  ProposalKind kind = ProposalKind::random_walk;
  Matrix covariance;                                                // random walk
  std::function<std::vector<double>(RandomStream&)> sampler;        // independence
  LogDensityFn log_density;                                         // independence, g

  static ProposalKernel random_walk(Matrix sigma) {
    ProposalKernel k;
    k.kind = ProposalKind::random_walk;
    k.covariance = std::move(sigma);
    return k;
  }
  static ProposalKernel independence(std::function<std::vector<double>(RandomStream&)> sampler,
                                     LogDensityFn log_g) {
    ProposalKernel k;
    k.kind = ProposalKind::independence;
    k.sampler = std::move(sampler);
    k.log_density = std::move(log_g);
    return k;
  }
  bool symmetric() const { return kind == ProposalKind::random_walk; }
};

/// N x d samples stored row-major; row 0 is x0.
struct McmcRun {
  std::size_t dim = 0;
  std::vector<double> data;
  std::size_t accepted = 0;
  std::size_t proposals = 0;
  std::size_t burn_in = 0;

  std::size_t size() const { return dim ? data.size() / dim : 0; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
  double acceptance_ratio() const {
    return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
  /// Coordinate j over the post-burn-in rows.
  std::vector<double> column(std::size_t j, bool after_burn_in = true) const {
    std::vector<double> out;
    for (std::size_t i = after_burn_in ? burn_in : 0; i < size(); ++i) out.push_back((*this)(i, j));
    return out;
  }
};

/// alpha = exp(min(delta, 0)) with delta the log acceptance ratio; a proposal
/// with log target -inf (or a NaN ratio) is rejected. Each step draws the
/// proposal first, then one uniform.
inline McmcRun mh_chain(const TargetDensity& target, const ProposalKernel& proposal,
                        const std::vector<double>& x0, std::size_t n, RandomStream& stream,
                        std::size_t burn_in = std::numeric_limits<std::size_t>::max()) {
  if (n < 1) throw std::invalid_argument("mh_chain: N must be >= 1");
  if (x0.size() != target.dim) throw std::invalid_argument("mh_chain: x0 dimension mismatch");
  if (burn_in == std::numeric_limits<std::size_t>::max()) burn_in = n / 10;
  if (burn_in >= n) throw std::invalid_argument("mh_chain: burn_in must be < N");
  const std::size_t d = target.dim;

  double log_fx = target.log_density(x0);
  if (!std::isfinite(log_fx))
    throw model_error("mh_chain: target density is zero or non-finite at x0");

  std::optional<Matrix> factor;
  if (proposal.kind == ProposalKind::random_walk) {
    if (proposal.covariance.rows() != d || proposal.covariance.cols() != d)
      throw std::invalid_argument("mh_chain: proposal covariance must be d x d");
    factor = cholesky(proposal.covariance);
  } else if (!proposal.sampler || !proposal.log_density) {
    throw std::invalid_argument("mh_chain: independence proposal needs sampler and density");
  }

  McmcRun run;
  run.dim = d;
  run.burn_in = burn_in;
  run.data.reserve(n * d);
  run.data.insert(run.data.end(), x0.begin(), x0.end());
  std::vector<double> x = x0, y(d), z(d);
  double log_gx = proposal.kind == ProposalKind::independence ? proposal.log_density(x0) : 0.0;

  for (std::size_t t = 1; t < n; ++t) {
    double log_gy = 0.0;
    if (factor) {
      for (auto& zi : z) zi = sample_standard_normal(stream);
      const Matrix& b = *factor;
      for (std::size_t i = 0; i < d; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k <= i; ++k) s += b(i, k) * z[k];
        y[i] = s;
      }
    } else {
      y = proposal.sampler(stream);
      if (y.size() != d) throw std::invalid_argument("mh_chain: proposal sampler returned wrong dimension");
      log_gy = proposal.log_density(y);
    }
    const double u = stream.next_uniform();
    ++run.proposals;

    const double log_fy = target.log_density(y);
    bool accept = false;
    if (log_fy != -std::numeric_limits<double>::infinity()) {
      double delta = log_fy - log_fx;
      if (!proposal.symmetric()) delta += log_gx - log_gy;
      if (!std::isnan(delta)) accept = u <= std::exp(std::min(delta, 0.0));
    }
    if (accept) {
      x = y;
      log_fx = log_fy;
      log_gx = log_gy;
      ++run.accepted;
    }
    run.data.insert(run.data.end(), x.begin(), x.end());
  }
  return run;
}

// ---------------------------------------------------------------------------
// Discrete Metropolis-Hastings

/// p_ij = q_ij min(pi_j q_ji / (pi_i q_ij), 1) for i != j; the diagonal
/// completes each row.
inline TransitionMatrix mh_discrete_transition_matrix(std::span<const double> pi,
                                                      const TransitionMatrix& q) {
  const std::size_t m = q.size();
  if (pi.size() != m) throw std::invalid_argument("mh_discrete_transition_matrix: dimension mismatch");
  for (double v : pi)
    if (!(v > 0.0)) throw std::invalid_argument("mh_discrete_transition_matrix: pi must be positive");
  Matrix p(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || q(i, j) == 0.0) continue;
      const double alpha = std::min(pi[j] * q(j, i) / (pi[i] * q(i, j)), 1.0);
      p(i, j) = q(i, j) * alpha;
      off += p(i, j);
    }
    p(i, i) = 1.0 - off;
  }
  return TransitionMatrix(std::move(p), q.labels());
}

/// Chain on state indices targeting pi (known up to a constant), proposing
/// from row X_t of q. Returns n states including x0.
inline std::vector<std::size_t> mh_discrete_chain(std::span<const double> pi, const TransitionMatrix& q,
                                                  std::size_t x0, std::size_t n, RandomStream& stream) {
  if (pi.size() != q.size() || x0 >= q.size())
    throw std::invalid_argument("mh_discrete_chain: dimension mismatch");
  std::vector<std::size_t> xs{x0};
  std::size_t x = x0;
  for (std::size_t t = 1; t < n; ++t) {
    const std::size_t y = q.next_state(x, stream.next_uniform());
    const double u = stream.next_uniform();
    const double alpha = std::min(pi[y] * q(y, x) / (pi[x] * q(x, y)), 1.0);
    if (u <= alpha) x = y;
    xs.push_back(x);
  }
  return xs;
}

// ---------------------------------------------------------------------------
// Log densities

namespace logpdf {

inline double normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Gamma with shape a and rate b.
inline double gamma(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Inverse gamma with shape a and scale b.
inline double inverse_gamma(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

/// Sum of Exp(rate) log densities.
inline double exponential_sample(std::span<const double> data, double rate) {
  if (!(rate > 0.0)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double x : data) s += x;
  return static_cast<double>(data.size()) * std::log(rate) - rate * s;
}

}  // namespace logpdf

// ---------------------------------------------------------------------------
// Posterior sampling

struct CoordinateSummary {
  double mean;
  double stddev;
  double half_width;  // 1.96 * std / sqrt(n), as for iid draws
};

struct PosteriorResult {
  McmcRun run;
  std::vector<CoordinateSummary> summary;
};

inline std::vector<CoordinateSummary> summarize(const McmcRun& run, double level = 0.95) {
  std::vector<CoordinateSummary> out;
  const double z = z_quantile(level);
  for (std::size_t j = 0; j < run.dim; ++j) {
    RunningStats s;
    for (std::size_t i = run.burn_in; i < run.size(); ++i) s.push(run(i, j));
    out.push_back({s.mean(), s.stddev(), z * s.stddev() / std::sqrt(static_cast<double>(s.count()))});
  }
  return out;
}

/// MH on log_likelihood + log_prior with summaries over post-burn-in draws.
inline PosteriorResult posterior_sample(const LogDensityFn& log_likelihood, const LogDensityFn& log_prior,
                                        const ProposalKernel& proposal, const std::vector<double>& theta0,
                                        std::size_t n, std::size_t burn_in, RandomStream& stream) {
  if (burn_in >= n) throw std::invalid_argument("posterior_sample: burn_in must be < N");
  TargetDensity target;
  target.dim = theta0.size();
  target.log_density = [&](std::span<const double> th) {
    const double lp = log_prior(th);
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
    return lp + log_likelihood(th);
  };
  PosteriorResult res{mh_chain(target, proposal, theta0, n, stream, burn_in), {}};
  res.summary = summarize(res.run);
  return res;
}

// ---------------------------------------------------------------------------
// Studies

/// Unnormalized log density of the bivariate example,
/// -(x^2 y^2 + x^2 + y^2 - 8x - 8y)/2.
inline double bivariate_example_log_density(std::span<const double> v) {
  const double x = v[0], y = v[1];
  return -0.5 * (x * x * y * y + x * x + y * y - 8.0 * x - 8.0 * y);
}

inline const std::vector<double>& recovery_times_group1() {
  static const std::vector<double> d{5, 8, 12, 7, 9, 10, 3, 6, 8, 11};
  return d;
}

inline const std::vector<double>& recovery_times_group2() {
  static const std::vector<double> d{10, 14, 7, 11, 13, 8, 15, 9, 10, 16};
  return d;
}

/// Sixty monthly portfolio returns used by the VaR study.
inline const std::vector<double>& portfolio_returns() {
  static const std::vector<double> d{
      0.07,  0.13,  0.10,  0.17,  0.11,  0.03,  0.15,  0.09,  0.12, 0.12,
      -0.06, 0.07,  0.09,  -0.01, 0.08,  0.08,  0.07,  0.19,  0.09, 0.12,
      0.03,  0.16,  -0.02, 0.2,   0.14,  0.05,  0.08,  0.06,  0.10, -0.07,
      -0.01, -0.07, -0.05, 0.21,  -0.05, 0.02,  -0.02, 0.15,  0.08, 0.02,
      -0.03, 0.01,  0.08,  0.13,  0.16,  -0.03, -0.13, 0.14,  0.11, 0.12,
      -0.01, -0.07, 0.16,  0.27,  -0.06, 0.01,  0.01,  0.01,  0.01, 0.16};
  return d;
}

struct VarConfig {
  double s0 = 1e6;
  double loss_threshold = 9e5;
  double horizon = 0.5;
  double dt = 0.01;
  double prior_mu_mean = 0.05;
  double prior_mu_sd = 0.1;
  double prior_sigma2_shape = 2.0;
  double prior_sigma2_scale = 4e-4;
  double tau_mu = 0.001;     // proposal variance for mu
  double tau_sigma = 0.001;  // proposal variance for sigma
  std::vector<double> theta0{0.05, 0.1};
  std::size_t n_mh = 10000;
  std::size_t burn_in = 2000;
  std::size_t thin_to = 100;
  std::size_t n_mc = 1000;
};

struct VarReport {
  EstimateReport loss_probability;  // over the retained posterior draws
  std::vector<double> per_draw_loss;
  std::vector<CoordinateSummary> posterior;  // (mu, sigma)
  double acceptance_ratio = 0.0;
};

/// Normal likelihood for the returns with theta = (mu, sigma), a normal prior
/// on mu and an inverse-gamma prior evaluated at sigma^2; sigma <= 0 is
/// outside the support. Each retained draw prices n_mc GBM paths.
inline VarReport var_portfolio_study(std::span<const double> returns, const VarConfig& cfg,
                                     RandomStream& stream) {
  if (returns.empty()) throw std::invalid_argument("var_portfolio_study: no returns");
  if (cfg.thin_to == 0 || cfg.n_mc == 0)
    throw std::invalid_argument("var_portfolio_study: thin_to and n_mc must be positive");
  if (cfg.burn_in >= cfg.n_mh || cfg.n_mh - cfg.burn_in < cfg.thin_to)
    throw std::invalid_argument("var_portfolio_study: not enough post-burn-in draws to thin");
  std::vector<double> data(returns.begin(), returns.end());
  auto log_lik = [data](std::span<const double> th) {
    const double mu = th[0], sigma = th[1];
    if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (double r : data) s += logpdf::normal(r, mu, sigma);
    return s;
  };
  auto log_prior = [cfg](std::span<const double> th) {
    const double mu = th[0], sigma = th[1];
    if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
    return logpdf::normal(mu, cfg.prior_mu_mean, cfg.prior_mu_sd) +
           logpdf::inverse_gamma(sigma * sigma, cfg.prior_sigma2_shape, cfg.prior_sigma2_scale);
  };
  const auto proposal = ProposalKernel::random_walk(Matrix{{cfg.tau_mu, 0.0}, {0.0, cfg.tau_sigma}});
  PosteriorResult post = posterior_sample(log_lik, log_prior, proposal, cfg.theta0, cfg.n_mh,
                                          cfg.burn_in, stream);

  VarReport rep;
  rep.posterior = post.summary;
  rep.acceptance_ratio = post.run.acceptance_ratio();
  const std::size_t kept = cfg.n_mh - cfg.burn_in;
  RunningStats loss;
  for (std::size_t k = 0; k < cfg.thin_to; ++k) {
    const std::size_t idx = cfg.burn_in + k * kept / cfg.thin_to;
    const double mu = post.run(idx, 0), sigma = post.run(idx, 1);
    DiffusionSpec spec;
    spec.drift = [mu](double, double x) { return mu * x; };
    spec.diffusion = [sigma](double, double x) { return sigma * x; };
    spec.t0 = 0.0;
    spec.t_end = cfg.horizon;
    spec.dt = cfg.dt;
    spec.x0 = cfg.s0;
    std::size_t below = 0;
    for (std::size_t j = 0; j < cfg.n_mc; ++j)
      if (euler_maruyama_terminal(spec, stream) < cfg.loss_threshold) ++below;
    const double pr = static_cast<double>(below) / static_cast<double>(cfg.n_mc);
    rep.per_draw_loss.push_back(pr);
    loss.push(pr);
  }
  rep.loss_probability = make_report(loss, 0.95);
  return rep;
}

}  // namespace simlab
