#pragma once

// Gillespie's direct method, tau-leaping, and a fixed-step RK4 counterpart.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simlab/errors.hpp"
#include "simlab/processes.hpp"
#include "simlab/rng.hpp"
#include "simlab/samplers.hpp"

namespace simlab {

using State = std::vector<long>;
using PropensityFn = std::function<void(std::span<const long> state, std::span<double> w)>;
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct ReactionSystem {
  std::vector<std::string> species;
  std::vector<std::vector<long>> state_change;  // m rows of length n
  PropensityFn propensity;
  std::map<std::string, double> rates;

  std::size_t num_species() const { return species.size(); }
  std::size_t num_reactions() const { return state_change.size(); }

  void validate() const {
    if (!propensity) throw std::invalid_argument("ReactionSystem: propensity function is required");
    for (const auto& row : state_change)
      if (row.size() != species.size())
        throw std::invalid_argument("ReactionSystem: state-change row length differs from species count");
  }
};

/// Propensities at `state`; throws model_error on a negative or NaN value.
inline void evaluate_propensities(const ReactionSystem& sys, std::span<const long> state,
                                  std::span<double> w) {
  if (state.size() != sys.num_species())
    throw std::invalid_argument("propensities: state dimension mismatch");
  sys.propensity(state, w);
  for (std::size_t j = 0; j < w.size(); ++j)
    if (!(w[j] >= 0.0))
      throw model_error("propensity " + std::to_string(j) + " is negative or NaN (" +
                        std::to_string(w[j]) + ")");
}

inline double total_propensity(const ReactionSystem& sys, std::span<const long> state) {
  std::vector<double> w(sys.num_reactions());
  evaluate_propensities(sys, state, w);
  double a = 0.0;
  for (double x : w) a += x;
  return a;
}

struct SsaEvent {
  double tau;
  std::size_t reaction_index;  // 0-based
  State new_state;
};

/// One direct-method step with explicit uniforms: tau = -ln(1-u1)/a and the
/// reaction is the smallest j with u2 <= sum_{i<=j} w_i/a. nullopt when a = 0.
inline std::optional<SsaEvent> gillespie_step(const ReactionSystem& sys, std::span<const long> state,
                                              double u1, double u2) {
  const std::size_t m = sys.num_reactions();
  std::vector<double> w(m);
  evaluate_propensities(sys, state, w);
  double a = 0.0;
  for (double x : w) a += x;
  if (!(a > 0.0)) return std::nullopt;
  std::vector<double> cum(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    acc += w[j];
    cum[j] = acc / a;
  }
  const std::size_t k = discrete_index(cum, w, u2);
  SsaEvent ev{-std::log1p(-u1) / a, k, State(state.begin(), state.end())};
  for (std::size_t i = 0; i < ev.new_state.size(); ++i) ev.new_state[i] += sys.state_change[k][i];
  return ev;
}

/// Draws u1 (waiting time) then u2 (which reaction).
inline std::optional<SsaEvent> gillespie_step(const ReactionSystem& sys, std::span<const long> state,
                                              RandomStream& stream) {
  // Nothing is drawn when the system is extinct.
  if (!(total_propensity(sys, state) > 0.0)) return std::nullopt;
  const double u1 = stream.next_uniform();
  const double u2 = stream.next_uniform();
  return gillespie_step(sys, state, u1, u2);
}

/// Every event is recorded. Stops when the next event time would exceed
/// t_final or the total propensity is 0.
inline Trajectory<long> run_ssa(const ReactionSystem& sys, const State& initial, double t_final,
                                RandomStream& stream, double t0 = 0.0) {
  sys.validate();
  if (initial.size() != sys.num_species())
    throw std::invalid_argument("run_ssa: initial state dimension mismatch");
  for (long v : initial)
    if (v < 0) throw std::invalid_argument("run_ssa: initial state must be non-negative");
  Trajectory<long> tr;
  State y = initial;
  double t = t0;
  tr.push(t, y);
  const std::size_t m = sys.num_reactions();
  std::vector<double> w(m), cum(m);
  for (;;) {
    evaluate_propensities(sys, y, w);
    double a = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      a += w[j];
      cum[j] = a;
    }
    if (!(a > 0.0)) break;
    const double tau = -std::log1p(-stream.next_uniform()) / a;
    if (t + tau > t_final) break;
    const std::size_t k = discrete_index(cum, w, stream.next_uniform() * a);
    t += tau;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += sys.state_change[k][i];
    tr.push(t, y);
  }
  return tr;
}

/// state + sum_j Poisson(w_j tau) v_j. Negative components are set to 0 and
/// counted in `clamps`.
inline State tau_leap_step(const ReactionSystem& sys, std::span<const long> state, double tau,
                           RandomStream& stream, std::size_t* clamps = nullptr) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau_leap_step: tau must be positive");
  std::vector<double> w(sys.num_reactions());
  evaluate_propensities(sys, state, w);
  State next(state.begin(), state.end());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const long fires = sample_poisson(w[j] * tau, stream);
    if (fires == 0) continue;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += fires * sys.state_change[j][i];
  }
  for (auto& v : next)
    if (v < 0) {
      v = 0;
      if (clamps) ++*clamps;
    }
  return next;
}

struct TauLeapRun {
  Trajectory<long> trajectory;
  std::size_t clamps = 0;
};

/// Fixed leaps of tau from t0; the last leap is shortened to end at t_final.
inline TauLeapRun run_tau_leap(const ReactionSystem& sys, const State& initial, double t_final,
                               double tau, RandomStream& stream, double t0 = 0.0) {
  sys.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("run_tau_leap: tau must be positive");
  TauLeapRun out;
  State y = initial;
  double t = t0;
  out.trajectory.push(t, y);
  while (t < t_final) {
    const double h = std::min(tau, t_final - t);
    y = tau_leap_step(sys, y, h, stream, &out.clamps);
    t = t + h >= t_final - 1e-12 * std::max(1.0, std::abs(t_final)) ? t_final : t + h;
    out.trajectory.push(t, y);
  }
  return out;
}

/// Classical fixed-step RK4; the last step is shortened to land on t_end.
inline Trajectory<double> run_deterministic(const OdeRhs& f, const std::vector<double>& initial,
                                            double t0, double t_end, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("run_deterministic: dt must be positive");
  if (!(t0 < t_end)) throw std::invalid_argument("run_deterministic: need t0 < t_end");
  const std::size_t n = initial.size();
  const auto steps = static_cast<std::size_t>(std::ceil((t_end - t0) / dt - 1e-9));
  Trajectory<double> tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  std::vector<double> y = initial, k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = t0;
  tr.push(t, y);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t_next = s + 1 == steps ? t_end : t0 + static_cast<double>(s + 1) * dt;
    const double h = t_next - t;
    f(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    f(t_next, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(y[i]))
        throw numerical_error("run_deterministic: state became non-finite at step " +
                              std::to_string(s + 1));
    }
    t = t_next;
    tr.push(t, y);
  }
  return tr;
}

/// Piecewise-constant (previous-event hold) values of `tr` on `grid`.
/// Grid points before the first event take the first state.
template <class T>
std::vector<std::vector<T>> resample_on_grid(const Trajectory<T>& tr, const std::vector<double>& grid) {
  if (tr.size() == 0) throw std::invalid_argument("resample_on_grid: empty trajectory");
  std::vector<std::vector<T>> out;
  out.reserve(grid.size());
  std::size_t k = 0;
  for (double g : grid) {
    while (k + 1 < tr.size() && tr.times[k + 1] <= g) ++k;
    out.push_back(tr.states[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mass-action reactions

struct MassActionReaction {
  double rate = 0.0;
  std::vector<long> reactant_orders;  // per species; empty or all zero for a source
  std::vector<long> state_change;
};

namespace detail {

inline double falling_binomial(long y, long k) {
  if (k <= 0) return 1.0;
  if (y < k) return 0.0;
  double c = 1.0;
  for (long i = 0; i < k; ++i) c *= static_cast<double>(y - i) / static_cast<double>(i + 1);
  return c;
}

}  // namespace detail

/// w = c * prod_i C(y_i, k_i): c y for unimolecular, c y1 y2 for distinct
/// bimolecular, c y(y-1)/2 for dimerization, and w = c for a source.
inline ReactionSystem mass_action_system(std::vector<std::string> species,
                                         std::vector<MassActionReaction> reactions,
                                         std::map<std::string, double> rates = {}) {
  ReactionSystem sys;
  sys.species = std::move(species);
  const std::size_t n = sys.species.size();
  for (auto& r : reactions) {
    if (r.reactant_orders.empty()) r.reactant_orders.assign(n, 0);
    if (r.reactant_orders.size() != n || r.state_change.size() != n)
      throw std::invalid_argument("mass_action_system: reaction vectors must have one entry per species");
    if (!(r.rate >= 0.0)) throw std::invalid_argument("mass_action_system: rates must be non-negative");
    sys.state_change.push_back(r.state_change);
  }
  sys.rates = std::move(rates);
  sys.propensity = [reactions](std::span<const long> y, std::span<double> w) {
    for (std::size_t j = 0; j < reactions.size(); ++j) {
      double v = reactions[j].rate;
      for (std::size_t i = 0; i < y.size(); ++i) v *= detail::falling_binomial(y[i], reactions[j].reactant_orders[i]);
      w[j] = v;
    }
  };
  return sys;
}

/// Mean-field rate equations matching mass_action_system for large counts:
/// reaction j runs at c_j prod_i y_i^k_i / k_i!.
inline OdeRhs mass_action_ode(std::vector<MassActionReaction> reactions, std::size_t num_species) {
  for (auto& r : reactions) {
    if (r.reactant_orders.empty()) r.reactant_orders.assign(num_species, 0);
    if (r.reactant_orders.size() != num_species || r.state_change.size() != num_species)
      throw std::invalid_argument("mass_action_ode: reaction vectors must have one entry per species");
  }
  return [reactions](double, std::span<const double> y, std::span<double> d) {
    std::fill(d.begin(), d.end(), 0.0);
    for (const auto& r : reactions) {
      double v = r.rate;
      for (std::size_t i = 0; i < y.size(); ++i)
        for (long k = 1; k <= r.reactant_orders[i]; ++k) v *= y[i] / static_cast<double>(k);
      for (std::size_t i = 0; i < y.size(); ++i) d[i] += v * static_cast<double>(r.state_change[i]);
    }
  };
}

// ---------------------------------------------------------------------------
// Model library

struct KineticModel {
  ReactionSystem system;
  OdeRhs ode;
  State initial;
  double t_final = 1.0;
};

namespace models {

/// Species (S, I, R); births mu*N into S, deaths mu per compartment,
/// infection beta*S*I/N, recovery gamma*I.
inline KineticModel sir(double mu = 1e-4, double beta = 0.25, double gamma = 0.05) {
  KineticModel m;
  m.system.species = {"S", "I", "R"};
  m.system.state_change = {{1, 0, 0}, {-1, 1, 0}, {0, -1, 1}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  m.system.rates = {{"mu", mu}, {"beta", beta}, {"gamma", gamma}};
  m.system.propensity = [=](std::span<const long> y, std::span<double> w) {
    const double s = static_cast<double>(y[0]), i = static_cast<double>(y[1]), r = static_cast<double>(y[2]);
    const double n = s + i + r;
    w[0] = mu * n;
    w[1] = n > 0.0 ? beta * s * i / n : 0.0;
    w[2] = gamma * i;
    w[3] = mu * s;
    w[4] = mu * i;
    w[5] = mu * r;
  };
  m.ode = [=](double, std::span<const double> y, std::span<double> d) {
    const double n = y[0] + y[1] + y[2];
    const double inf = n > 0.0 ? beta * y[0] * y[1] / n : 0.0;
    d[0] = mu * n - mu * y[0] - inf;
    d[1] = inf - mu * y[1] - gamma * y[1];
    d[2] = gamma * y[1] - mu * y[2];
  };
  m.initial = {198, 2, 0};
  m.t_final = 120.0;
  return m;
}

/// Species (S, E, C, P): S+E -> C (c1 S E), C -> S+E (c2 C), C -> P+E (c3 C).
inline KineticModel michaelis_menten(double c1 = 0.002, double c2 = 0.1, double c3 = 0.75) {
  KineticModel m;
  m.system.species = {"S", "E", "C", "P"};
  m.system.state_change = {{-1, -1, 1, 0}, {1, 1, -1, 0}, {0, 1, -1, 1}};
  m.system.rates = {{"c1", c1}, {"c2", c2}, {"c3", c3}};
  m.system.propensity = [=](std::span<const long> y, std::span<double> w) {
    w[0] = c1 * static_cast<double>(y[0]) * static_cast<double>(y[1]);
    w[1] = c2 * static_cast<double>(y[2]);
    w[2] = c3 * static_cast<double>(y[2]);
  };
  m.ode = [=](double, std::span<const double> y, std::span<double> d) {
    const double f = c1 * y[0] * y[1], b = c2 * y[2], k = c3 * y[2];
    d[0] = -f + b;
    d[1] = -f + b + k;
    d[2] = f - b - k;
    d[3] = k;
  };
  m.initial = {200, 300, 100, 50};
  m.t_final = 50.0;
  return m;
}

/// Species (F, R): R -> 2R (alpha R), R+F -> 2F (beta R F), F -> 0 (gamma F).
inline KineticModel lotka_volterra(double alpha = 1.0, double beta = 0.005, double gamma = 0.6) {
  KineticModel m;
  m.system.species = {"F", "R"};
  m.system.state_change = {{0, 1}, {1, -1}, {-1, 0}};
  m.system.rates = {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}};
  m.system.propensity = [=](std::span<const long> y, std::span<double> w) {
    const double f = static_cast<double>(y[0]), r = static_cast<double>(y[1]);
    w[0] = alpha * r;
    w[1] = beta * r * f;
    w[2] = gamma * f;
  };
  m.ode = [=](double, std::span<const double> y, std::span<double> d) {
    d[0] = beta * y[0] * y[1] - gamma * y[0];
    d[1] = alpha * y[1] - beta * y[0] * y[1];
  };
  m.initial = {50, 100};
  m.t_final = 30.0;
  return m;
}

/// y -> 0 at rate lambda per particle.
inline KineticModel decay(double lambda = 0.5, long y0 = 1000, double t_final = 4.0) {
  KineticModel m;
  m.system.species = {"y"};
  m.system.state_change = {{-1}};
  m.system.rates = {{"lambda", lambda}};
  m.system.propensity = [=](std::span<const long> y, std::span<double> w) {
    w[0] = lambda * static_cast<double>(y[0]);
  };
  m.ode = [=](double, std::span<const double> y, std::span<double> d) { d[0] = -lambda * y[0]; };
  m.initial = {y0};
  m.t_final = t_final;
  return m;
}

}  // namespace models

}  // namespace simlab
