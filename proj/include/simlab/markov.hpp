#pragma once

// Finite time-homogeneous Markov chains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/linalg.hpp"
#include "simlab/montecarlo.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"

namespace simlab {

using ProbabilityVector = std::vector<double>;

/// Row-stochastic matrix with state labels. Rows off by less than 1e-9 are
/// renormalized (counted in repaired_rows()); larger deviations throw.
class TransitionMatrix {
 public:
  static constexpr double kRowTolerance = 1e-12;
  static constexpr double kRepairTolerance = 1e-9;

  explicit TransitionMatrix(Matrix p, std::vector<std::string> labels = {})
      : p_(std::move(p)), labels_(std::move(labels)) {
    if (!p_.square() || p_.rows() == 0)
      throw std::invalid_argument("TransitionMatrix: matrix must be square and non-empty");
    const std::size_t m = p_.rows();
    if (labels_.empty()) {
      for (std::size_t i = 0; i < m; ++i) labels_.push_back(std::to_string(i));
    } else if (labels_.size() != m) {
      throw std::invalid_argument("TransitionMatrix: need one label per state");
    }
    for (std::size_t i = 0; i < m; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = p_(i, j);
        if (!(v >= 0.0 && v <= 1.0))
          throw std::invalid_argument("TransitionMatrix: entry (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") outside [0,1]");
        sum += v;
      }
      const double dev = std::abs(sum - 1.0);
      if (dev <= kRowTolerance) continue;
      if (dev > kRepairTolerance)
        throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " sums to " +
                                    std::to_string(sum));
      for (std::size_t j = 0; j < m; ++j) p_(i, j) /= sum;
      ++repaired_rows_;
    }
    cumulative_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        acc += p_(i, j);
        cumulative_[i].push_back(acc);
      }
    }
  }

  TransitionMatrix(std::initializer_list<std::initializer_list<double>> rows)
      : TransitionMatrix(Matrix(rows)) {}

  std::size_t size() const { return p_.rows(); }
  const Matrix& matrix() const { return p_; }
  double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t repaired_rows() const { return repaired_rows_; }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::invalid_argument("TransitionMatrix: unknown state " + label);
    return static_cast<std::size_t>(it - labels_.begin());
  }

  /// Next state from row i with uniform u.
  std::size_t next_state(std::size_t i, double u) const {
    return discrete_index(cumulative_[i], p_.row(i), u);
  }

 private:
  Matrix p_;
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> cumulative_;
  std::size_t repaired_rows_ = 0;
};

inline void validate_probability_vector(std::span<const double> pi, std::size_t m) {
  if (pi.size() != m) throw std::invalid_argument("probability vector: dimension mismatch");
  double sum = 0.0;
  for (double v : pi) {
    if (!(v >= 0.0)) throw std::invalid_argument("probability vector: negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("probability vector: entries sum to " + std::to_string(sum));
}

inline ProbabilityVector point_mass(std::size_t m, std::size_t k) {
  if (k >= m) throw std::invalid_argument("point_mass: index out of range");
  ProbabilityVector v(m, 0.0);
  v[k] = 1.0;
  return v;
}

/// pi P.
inline ProbabilityVector step_distribution(std::span<const double> pi, const TransitionMatrix& p) {
  validate_probability_vector(pi, p.size());
  return left_multiply(pi, p.matrix());
}

/// P^t by repeated squaring; P^0 is the identity.
inline TransitionMatrix n_step_matrix(const TransitionMatrix& p, long t) {
  if (t < 0) throw std::invalid_argument("n_step_matrix: t must be non-negative");
  Matrix result = Matrix::identity(p.size());
  Matrix base = p.matrix();
  for (auto e = static_cast<unsigned long>(t); e > 0; e >>= 1) {
    if (e & 1u) result = result * base;
    if (e > 1) base = base * base;
  }
  // Rounding can push entries a hair above 1; clamp before revalidating.
  for (std::size_t i = 0; i < result.rows(); ++i)
    for (std::size_t j = 0; j < result.cols(); ++j) result(i, j) = std::clamp(result(i, j), 0.0, 1.0);
  return TransitionMatrix(std::move(result), p.labels());
}

struct ChainClassification {
  std::vector<std::vector<std::size_t>> classes;  // communicating classes
  std::vector<bool> closed;                       // per class
  std::vector<long> periods;                      // per class
  bool irreducible = false;
  bool aperiodic = false;
  bool ergodic = false;
};

/// Communicating classes by mutual reachability; the period of each class is
/// the gcd of level[u] + 1 - level[v] over edges u -> v inside the class,
/// with levels from a BFS rooted in the class.
inline ChainClassification classify(const TransitionMatrix& p) {
  const std::size_t m = p.size();
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (std::size_t s = 0; s < m; ++s) {
    std::queue<std::size_t> q;
    reach[s][s] = true;
    q.push(s);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v = 0; v < m; ++v)
        if (p(u, v) > 0.0 && !reach[s][v]) {
          reach[s][v] = true;
          q.push(v);
        }
    }
  }

  ChainClassification out;
  std::vector<long> class_of(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    if (class_of[i] >= 0) continue;
    std::vector<std::size_t> cls;
    for (std::size_t j = 0; j < m; ++j)
      if (reach[i][j] && reach[j][i]) {
        cls.push_back(j);
        class_of[j] = static_cast<long>(out.classes.size());
      }
    out.classes.push_back(std::move(cls));
  }

  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    const auto& cls = out.classes[c];
    bool closed = true;
    for (std::size_t u : cls)
      for (std::size_t v = 0; v < m; ++v)
        if (p(u, v) > 0.0 && class_of[v] != static_cast<long>(c)) closed = false;
    out.closed.push_back(closed);

    std::vector<long> level(m, -1);
    std::queue<std::size_t> q;
    level[cls.front()] = 0;
    q.push(cls.front());
    long g = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v = 0; v < m; ++v) {
        if (!(p(u, v) > 0.0) || class_of[v] != static_cast<long>(c)) continue;
        if (level[v] < 0) {
          level[v] = level[u] + 1;
          q.push(v);
        } else {
          g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
        }
      }
    }
    // g == 0: a single state without a self-loop (transient, no return path).
    out.periods.push_back(g);
  }

  out.irreducible = out.classes.size() == 1;
  out.aperiodic = std::all_of(out.periods.begin(), out.periods.end(), [](long d) { return d == 1; });
  out.ergodic = out.irreducible && out.aperiodic;
  return out;
}

struct StationaryOptions {
  double tol = 1e-10;
  long max_iter = 1'000'000;
  bool require_ergodic = true;
};

/// Power iteration pi <- pi P from the uniform vector until ||pi P - pi||_inf
/// < tol. Non-ergodic chains throw model_error unless require_ergodic is
/// off; non-convergence throws numerical_error carrying the last residual.
inline ProbabilityVector stationary_distribution(const TransitionMatrix& p,
                                                 const StationaryOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("stationary_distribution: tol must be positive");
  if (opt.require_ergodic && !classify(p).ergodic)
    throw model_error("stationary_distribution: chain is not ergodic; stationary distribution "
                      "is not unique or not a limit");
  const std::size_t m = p.size();
  ProbabilityVector pi(m, 1.0 / static_cast<double>(m));
  double residual = 0.0;
  for (long it = 0; it < opt.max_iter; ++it) {
    ProbabilityVector next = step_distribution(pi, p);
    residual = 0.0;
    for (std::size_t j = 0; j < m; ++j) residual = std::max(residual, std::abs(next[j] - pi[j]));
    pi = std::move(next);
    if (residual < opt.tol) return pi;
  }
  throw numerical_error("stationary_distribution: no convergence after " +
                            std::to_string(opt.max_iter) + " iterations",
                        residual);
}

/// X_0 ~ pi0, X_{t+1} from row X_t; returns `length` states.
inline std::vector<std::size_t> generate_chain(std::span<const double> pi0,
                                               const TransitionMatrix& p, std::size_t length,
                                               RandomStream& stream) {
  validate_probability_vector(pi0, p.size());
  std::vector<std::size_t> xs;
  if (length == 0) return xs;
  xs.reserve(length);
  std::vector<double> cum(pi0.size());
  std::partial_sum(pi0.begin(), pi0.end(), cum.begin());
  xs.push_back(discrete_index(cum, pi0, stream.next_uniform()));
  for (std::size_t t = 1; t < length; ++t) xs.push_back(p.next_state(xs.back(), stream.next_uniform()));
  return xs;
}

using PathPredicate = std::function<bool(std::span<const std::size_t>)>;

/// Probability that `predicate` holds on X_0..X_horizon. Simulation k runs
/// on substream k of `stream`.
inline EstimateReport estimate_chain_event(std::span<const double> pi0, const TransitionMatrix& p,
                                           std::size_t horizon, const PathPredicate& predicate,
                                           std::size_t n_sims, const RandomStream& stream,
                                           double level = 0.95) {
  if (horizon < 1) throw std::invalid_argument("estimate_chain_event: horizon must be >= 1");
  if (n_sims < 2) throw std::invalid_argument("estimate_chain_event: n_sims must be >= 2");
  RunningStats s;
  for (std::size_t k = 0; k < n_sims; ++k) {
    RandomStream local = stream.spawn_substream(k);
    const auto path = generate_chain(pi0, p, horizon + 1, local);
    s.push(predicate(path) ? 1.0 : 0.0);
  }
  return make_report(s, level);
}

/// Common chains used across scenarios and tests.
namespace chains {

inline TransitionMatrix weather() {
  return TransitionMatrix(Matrix{{0.0, 0.5, 0.5}, {0.25, 0.5, 0.25}, {0.25, 0.25, 0.5}},
                          {"sunny", "cloudy", "rainy"});
}

inline TransitionMatrix two_state_weather() {
  return TransitionMatrix(Matrix{{0.7, 0.3}, {0.6, 0.4}}, {"sunny", "cloudy"});
}

inline TransitionMatrix four_state() {
  return TransitionMatrix(Matrix{{0.25, 0.25, 0.0, 0.5},
                                 {0.0, 1.0, 0.0, 0.0},
                                 {0.5, 0.0, 0.5, 0.0},
                                 {0.25, 0.25, 0.25, 0.25}},
                          {"1", "2", "3", "4"});
}

inline TransitionMatrix purchase_funnel() {
  return TransitionMatrix(Matrix{{0.6, 0.3, 0.1, 0.0},
                                 {0.2, 0.5, 0.2, 0.1},
                                 {0.0, 0.1, 0.6, 0.3},
                                 {0.0, 0.0, 0.0, 1.0}},
                          {"browsing", "cart", "checkout", "purchased"});
}

}  // namespace chains

}  // namespace simlab
