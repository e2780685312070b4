#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "simlab/markov.hpp"

using namespace simlab;
using Catch::Approx;

namespace {

oracle::Mat to_mat(const TransitionMatrix& p) {
  oracle::Mat m(p.size(), std::vector<double>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) m[i][j] = p(i, j);
  return m;
}

double row_sum(const TransitionMatrix& p, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p(i, j);
  return s;
}

}  // namespace

TEST_CASE("transition matrix validation") {
  CHECK_THROWS_AS(TransitionMatrix({{0.5, 0.6}, {0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(TransitionMatrix({{1.2, -0.2}, {0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(TransitionMatrix(Matrix(2, 3, 0.5)), std::invalid_argument);
  // 0.33/0.33/0.34 is exact; 0.33/0.33/0.33 is too far off to repair.
  CHECK_NOTHROW(TransitionMatrix({{0.33, 0.33, 0.34}, {0, 1, 0}, {0, 0, 1}}));
  CHECK_THROWS_AS(TransitionMatrix({{0.33, 0.33, 0.33}, {0, 1, 0}, {0, 0, 1}}), std::invalid_argument);

  const TransitionMatrix near({{0.5 + 4e-10, 0.5}, {0.25, 0.75}});
  CHECK(near.repaired_rows() == 1);
  CHECK(std::abs(row_sum(near, 0) - 1.0) <= 1e-15);

  const auto w = chains::weather();
  CHECK(w.index_of("rainy") == 2);
  CHECK_THROWS_AS(w.index_of("snowy"), std::invalid_argument);
}

TEST_CASE("step_distribution on the weather chain") {
  const auto p = chains::weather();
  const auto one = step_distribution(point_mass(3, 1), p);
  CHECK(one[0] == Approx(0.25).margin(1e-15));
  CHECK(one[1] == Approx(0.5).margin(1e-15));
  CHECK(one[2] == Approx(0.25).margin(1e-15));
  const auto two = step_distribution(one, p);
  CHECK(two[0] == Approx(0.1875).margin(1e-15));
  CHECK(two[1] == Approx(0.4375).margin(1e-15));
  CHECK(two[2] == Approx(0.3750).margin(1e-15));

  const TransitionMatrix id(Matrix::identity(3));
  const std::vector<double> pi{0.2, 0.3, 0.5};
  CHECK(step_distribution(pi, id) == pi);

  CHECK_THROWS_AS(step_distribution(std::vector<double>{0.5, 0.5}, p), std::invalid_argument);
  CHECK_THROWS_AS(step_distribution(std::vector<double>{0.5, 0.5, 0.5}, p), std::invalid_argument);
}

TEST_CASE("distribution evolution keeps the probability invariants") {
  const auto p = chains::purchase_funnel();
  std::vector<double> pi = point_mass(4, 0);
  for (int t = 0; t < 10000; ++t) {
    pi = step_distribution(pi, p);
    double s = 0.0;
    for (double x : pi) {
      REQUIRE(x >= 0.0);
      s += x;
    }
    REQUIRE(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("n-step matrices") {
  const auto w = chains::weather();
  const auto p7 = n_step_matrix(w, 7);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(p7(i, 0) - 0.2) <= 5e-4);
    CHECK(std::abs(p7(i, 1) - 0.4) <= 5e-4);
    CHECK(std::abs(p7(i, 2) - 0.4) <= 5e-4);
  }
  CHECK(n_step_matrix(w, 0).matrix() == Matrix::identity(3));
  CHECK(n_step_matrix(w, 1).matrix() == w.matrix());
  CHECK_THROWS_AS(n_step_matrix(w, -1), std::invalid_argument);

  SECTION("four-state chain entries against path enumeration") {
    const auto f = chains::four_state();
    const auto m = to_mat(f);
    // states are labelled 1..4
    CHECK(n_step_matrix(f, 2)(2, 1) == Approx(oracle::path_sum(m, 2, 1, 2)).epsilon(1e-14));
    CHECK(n_step_matrix(f, 3)(0, 2) == Approx(oracle::path_sum(m, 0, 2, 3)).epsilon(1e-14));
    // by hand: P^2(3->2) = 0.5*0.25 + 0.5*0 + 0*1 + 0*0.25 = 0.125
    CHECK(n_step_matrix(f, 2)(2, 1) == Approx(0.125).epsilon(1e-14));
  }

  SECTION("rows stay stochastic") {
    for (const auto& p : {chains::weather(), chains::four_state(), chains::purchase_funnel()})
      for (long t : {1L, 2L, 5L, 17L, 100L, 1000L}) {
        const auto pt = n_step_matrix(p, t);
        for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(std::abs(row_sum(pt, i) - 1.0) <= 1e-10);
      }
  }

  SECTION("matches naive evolution") {
    const auto p = chains::purchase_funnel();
    const auto m = to_mat(p);
    const auto p6 = n_step_matrix(p, 6);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> e(4, 0.0);
      e[i] = 1.0;
      const auto row = oracle::evolve(e, m, 6);
      for (std::size_t j = 0; j < 4; ++j) CHECK(p6(i, j) == Approx(row[j]).margin(1e-14));
    }
  }
}

TEST_CASE("stationary distributions") {
  const auto w = stationary_distribution(chains::weather());
  CHECK(std::abs(w[0] - 0.2) <= 1e-8);
  CHECK(std::abs(w[1] - 0.4) <= 1e-8);
  CHECK(std::abs(w[2] - 0.4) <= 1e-8);

  const auto two = stationary_distribution(chains::two_state_weather());
  CHECK(std::abs(two[0] - 2.0 / 3.0) <= 1e-8);
  CHECK(std::abs(two[1] - 1.0 / 3.0) <= 1e-8);

  CHECK_THROWS_AS(stationary_distribution(TransitionMatrix(Matrix::identity(3))), model_error);
  CHECK_THROWS_AS(stationary_distribution(chains::purchase_funnel()), model_error);

  SECTION("fixed point residual") {
    for (const auto& p : {chains::weather(), chains::two_state_weather()}) {
      StationaryOptions opt;
      const auto pi = stationary_distribution(p, opt);
      const auto next = step_distribution(pi, p);
      for (std::size_t j = 0; j < pi.size(); ++j) CHECK(std::abs(next[j] - pi[j]) < opt.tol);
    }
  }

  SECTION("non-convergence carries the residual") {
    StationaryOptions opt;
    opt.max_iter = 2;
    opt.tol = 1e-15;
    try {
      stationary_distribution(TransitionMatrix({{0.999, 0.001}, {0.002, 0.998}}), opt);
      FAIL("expected numerical_error");
    } catch (const numerical_error& e) {
      CHECK(e.residual() > opt.tol);
    }
  }
}

TEST_CASE("classification") {
  const auto cyc = classify(TransitionMatrix({{0, 1}, {1, 0}}));
  CHECK(cyc.irreducible);
  REQUIRE(cyc.periods.size() == 1);
  CHECK(cyc.periods[0] == 2);
  CHECK_FALSE(cyc.aperiodic);
  CHECK_FALSE(cyc.ergodic);

  const auto w = classify(chains::weather());
  CHECK(w.irreducible);
  CHECK(w.aperiodic);
  CHECK(w.ergodic);

  const auto f = classify(chains::purchase_funnel());
  CHECK_FALSE(f.irreducible);
  CHECK_FALSE(f.ergodic);
  CHECK(f.classes.size() == 2);

  const auto four = classify(chains::four_state());
  CHECK_FALSE(four.irreducible);

  // 3-cycle with a chord of length 2 from state 0: gcd(3, 2) = 1
  const auto mixed = classify(TransitionMatrix({{0, 0.5, 0.5}, {0, 0, 1}, {1, 0, 0}}));
  CHECK(mixed.irreducible);
  CHECK(mixed.periods[0] == 1);
  CHECK(mixed.ergodic);

  const auto three = classify(TransitionMatrix({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
  CHECK(three.periods[0] == 3);

  for (const auto& c : {cyc, w, f, four, mixed, three}) CHECK(c.ergodic == (c.irreducible && c.aperiodic));
}

TEST_CASE("chain realization") {
  SECTION("identity keeps the start state") {
    RandomStream s(1);
    const auto xs = generate_chain(point_mass(4, 2), TransitionMatrix(Matrix::identity(4)), 50, s);
    REQUIRE(xs.size() == 50);
    for (auto x : xs) CHECK(x == 2);
  }

  SECTION("deterministic two-cycle alternates") {
    RandomStream s(2);
    const auto xs = generate_chain(point_mass(2, 0), TransitionMatrix({{0, 1}, {1, 0}}), 20, s);
    for (std::size_t t = 0; t < xs.size(); ++t) CHECK(xs[t] == t % 2);
  }

  SECTION("long weather run visits states at the stationary rates") {
    RandomStream s(3);
    const std::size_t n = 100000;
    const auto xs = generate_chain(point_mass(3, 0), chains::weather(), n, s);
    const std::vector<double> pi{0.2, 0.4, 0.4};
    std::vector<double> freq(3, 0.0);
    for (auto x : xs) freq[x] += 1.0 / n;
    // successive states are correlated; the tolerance is the iid one with
    // a generous multiplier
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(freq[j] - pi[j]) <= 5.0 * std::sqrt(pi[j] * (1 - pi[j]) / n) * 2.0);
  }

  SECTION("empirical path frequencies match the factorized joint law") {
    // dyadic chain so every path probability is exact in binary
    const TransitionMatrix p({{0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}, {0.0, 0.5, 0.5}});
    const std::vector<double> pi0{0.5, 0.25, 0.25};
    RandomStream s(4);
    const std::size_t n = 200000;
    std::vector<double> counts(27, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto x = generate_chain(pi0, p, 3, s);
      counts[x[0] * 9 + x[1] * 3 + x[2]] += 1.0;
    }
    const auto m = to_mat(p);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t c = 0; c < 3; ++c) {
          const double joint = pi0[a] * p(a, b) * p(b, c);
          // brute force: the sampling tree probability via the one-step
          // path sums, each of which enumerates successors
          const double tree = pi0[a] * oracle::path_sum(m, a, b, 1) * oracle::path_sum(m, b, c, 1);
          CHECK(joint == tree);
          const double freq = counts[a * 9 + b * 3 + c] / n;
          CHECK(std::abs(freq - joint) <= 5.0 * std::sqrt(joint * (1 - joint) / n) + 1e-12);
        }
  }

  SECTION("walk on a finite chain matches n-step evolution") {
    // reflecting walk on {0..4}
    const TransitionMatrix p({{0.5, 0.5, 0, 0, 0},
                              {0.5, 0, 0.5, 0, 0},
                              {0, 0.5, 0, 0.5, 0},
                              {0, 0, 0.5, 0, 0.5},
                              {0, 0, 0, 0.5, 0.5}});
    const auto exact = step_distribution(point_mass(5, 2), n_step_matrix(p, 6));
    RandomStream root(5);
    const std::size_t n = 100000;
    std::vector<double> freq(5, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      RandomStream s = root.spawn_substream(k);
      freq[generate_chain(point_mass(5, 2), p, 7, s).back()] += 1.0 / n;
    }
    double l1 = 0.0;
    for (std::size_t j = 0; j < 5; ++j) l1 += std::abs(freq[j] - exact[j]);
    CHECK(l1 < 0.02);
  }
}

TEST_CASE("event probabilities over chain paths") {
  SECTION("rainy on day five from a sunny start") {
    const auto p = chains::weather();
    const double exact = n_step_matrix(p, 5)(0, 2);
    const auto r = estimate_chain_event(point_mass(3, 0), p, 5,
                                        [](std::span<const std::size_t> x) { return x[5] == 2; }, 10000,
                                        RandomStream(6));
    CHECK(r.covers(exact));
  }

  SECTION("always-true predicate") {
    const auto r = estimate_chain_event(point_mass(3, 0), chains::weather(), 3,
                                        [](std::span<const std::size_t>) { return true; }, 100, RandomStream(7));
    CHECK(r.mean == 1.0);
    CHECK(r.half_width == 0.0);
  }

  SECTION("purchase within six steps from browsing") {
    const auto p = chains::purchase_funnel();
    const double exact = n_step_matrix(p, 6)(0, 3);
    const auto r = estimate_chain_event(
        point_mass(4, 0), p, 6,
        [](std::span<const std::size_t> x) {
          for (auto s : x)
            if (s == 3) return true;
          return false;
        },
        20000, RandomStream(8));
    CHECK(r.covers(exact));
  }

  SECTION("reproducible") {
    auto pred = [](std::span<const std::size_t> x) { return x.back() == 1; };
    const auto a = estimate_chain_event(point_mass(3, 0), chains::weather(), 4, pred, 1000, RandomStream(9));
    const auto b = estimate_chain_event(point_mass(3, 0), chains::weather(), 4, pred, 1000, RandomStream(9));
    CHECK(a.mean == b.mean);
  }

  CHECK_THROWS_AS(estimate_chain_event(point_mass(3, 0), chains::weather(), 0,
                                       [](std::span<const std::size_t>) { return true; }, 100, RandomStream(1)),
                  std::invalid_argument);
}
