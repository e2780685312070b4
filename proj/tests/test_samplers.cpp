#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "simlab/samplers.hpp"
#include "simlab/stats.hpp"

using namespace simlab;
using Catch::Approx;

namespace {

double mean_of(const std::vector<double>& xs) { return simlab::mean(xs); }

template <class F>
std::vector<double> draw(std::size_t n, RandomStream& s, F&& f) {
  std::vector<double> out(n);
  for (auto& x : out) x = f(s);
  return out;
}

}  // namespace

TEST_CASE("exponential inversion") {
  CHECK(exponential_from_uniform(1.0, 1.0 - std::exp(-1.0)) == Approx(1.0).epsilon(1e-15));
  CHECK(exponential_from_uniform(0.5, 0.5) == Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(exponential_from_uniform(2.0, 0.0) == 0.0);

  RandomStream s(1);
  const std::size_t n = 100000;
  const auto xs = draw(n, s, [](RandomStream& r) { return sample_exponential(0.5, r); });
  CHECK(std::abs(mean_of(xs) - 2.0) <= 5.0 * 2.0 / std::sqrt(double(n)));
  for (double x : xs) REQUIRE(x >= 0.0);

  CHECK_THROWS_AS(sample_exponential(0.0, s), std::invalid_argument);
  CHECK_THROWS_AS(sample_exponential(-1.0, s), std::invalid_argument);
}

TEST_CASE("discrete sampling follows the stepwise cdf") {
  const auto die = fair_die();
  CHECK(die.value_for(0.5) == 3);
  CHECK(die.value_for(0.0) == 1);
  CHECK(die.value_for(std::nextafter(1.0, 0.0)) == 6);

  DiscreteDistribution<int> one({7}, {1.0});
  for (double u : {0.0, 0.3, 0.999}) CHECK(one.value_for(u) == 7);

  SECTION("u placed inside each cumulative interval returns that state") {
    DiscreteDistribution<double> d({-1.0, 0.5, 2.0, 3.0, 10.0}, {0.1, 0.25, 0.0, 0.4, 0.25});
    const std::vector<double> lo{0.0, 0.1, 0.35, 0.35, 0.75};
    const std::vector<double> hi{0.1, 0.35, 0.35, 0.75, 1.0};
    for (std::size_t k = 0; k < 5; ++k) {
      if (hi[k] == lo[k]) continue;  // zero-mass state is never returned
      for (double frac : {0.01, 0.5, 0.99}) CHECK(d.index_for(lo[k] + frac * (hi[k] - lo[k])) == k);
    }
    for (double u = 0.0; u < 1.0; u += 0.001) CHECK(d.index_for(u) != 2);
  }

  SECTION("die frequencies") {
    RandomStream s(2);
    const int n = 100000;
    std::vector<int> counts(7, 0);
    for (int i = 0; i < n; ++i) ++counts[sample_discrete(die, s)];
    const double tol = 5.0 * std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0)) / n;
    for (int k = 1; k <= 6; ++k) CHECK(std::abs(counts[k] / double(n) - 1.0 / 6.0) <= tol);
  }

  CHECK_THROWS_AS(DiscreteDistribution<int>({1, 2}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDistribution<int>({2, 1}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDistribution<int>({1, 2}, {-0.5, 1.5}), std::invalid_argument);
}

TEST_CASE("bernoulli") {
  RandomStream s(3);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(sample_bernoulli(0.0, s) == 0);
    REQUIRE(sample_bernoulli(1.0, s) == 1);
  }
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_bernoulli(0.6, s);
  CHECK(std::abs(sum / n - 0.6) <= 5.0 * std::sqrt(0.24 / n));

  // Binomial(20, 0.3) as a sum of Bernoulli draws.
  RunningStats b;
  for (int i = 0; i < n; ++i) b.push(static_cast<double>(sample_binomial_bernoulli_sum(20, 0.3, s)));
  CHECK(std::abs(b.mean() - 6.0) <= 5.0 * std::sqrt(20 * 0.3 * 0.7 / n));

  CHECK_THROWS_AS(sample_bernoulli(1.5, s), std::invalid_argument);
  CHECK_THROWS_AS(sample_bernoulli(-0.1, s), std::invalid_argument);
}

TEST_CASE("named inverse cdfs") {
  CHECK(inverse::linear_pdf()(0.25) == 0.5);
  CHECK(inverse::sine()(0.5) == Approx(std::numbers::pi / 2).epsilon(1e-15));
  for (double u : {0.1, 0.5, 0.9})
    CHECK(inverse::weibull(1.0, 2.0)(u) == Approx(inverse::exponential(0.5)(u)).epsilon(1e-14));
  CHECK(inverse::beta_alpha_one(2.0)(0.25) == Approx(0.5));
  CHECK(inverse::beta_one_beta(2.0)(0.75) == Approx(0.5));

  SECTION("every shipped inverse is monotone") {
    const std::vector<InverseCdf> fs{inverse::linear_pdf(),      inverse::exponential(0.7),
                                     inverse::weibull(1.5, 2.0), inverse::weibull(0.5, 1.0),
                                     inverse::sine(),            inverse::beta_alpha_one(3.0),
                                     inverse::beta_one_beta(0.5), inverse::uniform(-2.0, 5.0)};
    for (const auto& f : fs) {
      double prev = f(1e-9);
      for (double u = 0.001; u < 1.0; u += 0.001) {
        const double x = f(u);
        REQUIRE(x >= prev);
        prev = x;
      }
    }
  }

  SECTION("inverse transform draws match the pdf 2x") {
    RandomStream s(4);
    const auto xs = draw(100000, s, [](RandomStream& r) { return sample_inverse_transform(inverse::linear_pdf(), r); });
    CHECK(std::abs(mean_of(xs) - 2.0 / 3.0) <= 5.0 * std::sqrt(1.0 / 18.0 / 100000));
  }
}

TEST_CASE("ordered statistics") {
  const auto id = inverse::uniform(0.0, 1.0);
  for (double u : {0.2, 0.7}) {
    CHECK(ordered_statistic_from_uniform(id, 1, OrderStatistic::max, u) == id(u));
    CHECK(ordered_statistic_from_uniform(id, 1, OrderStatistic::min, u) == Approx(1.0 - u));
  }
  RandomStream s(5);
  const std::size_t n = 100000;
  const auto mx = draw(n, s, [&](RandomStream& r) { return sample_ordered_statistic(id, 3, OrderStatistic::max, r); });
  const auto mn = draw(n, s, [&](RandomStream& r) { return sample_ordered_statistic(id, 3, OrderStatistic::min, r); });
  // Var of max of 3 uniforms = 3/80.
  const double tol = 5.0 * std::sqrt(3.0 / 80.0 / n);
  CHECK(std::abs(mean_of(mx) - 0.75) <= tol);
  CHECK(std::abs(mean_of(mn) - 0.25) <= tol);
  CHECK_THROWS_AS(sample_ordered_statistic(id, 0, OrderStatistic::max, s), std::invalid_argument);
}

TEST_CASE("acceptance-rejection") {
  const std::size_t n = 100000;

  SECTION("pdf 2x under the uniform: rate 1/2 and exact cdf") {
    RandomStream s(6);
    std::size_t trials = 0;
    std::vector<double> xs;
    while (trials < n) {
      const auto d = sample_accept_reject(linear_pdf_envelope(), s);
      trials += d.trials;
      xs.push_back(d.value);
    }
    const double rate = double(xs.size()) / double(trials);
    CHECK(std::abs(rate - 0.5) <= 5.0 * std::sqrt(0.25 / trials));

    RandomStream s2(7);
    std::vector<double> acc(n);
    for (auto& x : acc) x = sample_accept_reject(linear_pdf_envelope(), s2).value;
    for (double x : {0.25, 0.5, 0.75}) {
      double below = 0.0;
      for (double v : acc) below += v <= x;
      const double f = x * x;
      CHECK(std::abs(below / n - f) <= 5.0 * std::sqrt(f * (1.0 - f) / n));
    }
  }

  SECTION("semicircle: acceptance rate pi/4") {
    RandomStream s(8);
    std::size_t trials = 0, accepted = 0;
    while (trials < n) {
      trials += sample_accept_reject(semicircle_envelope(1.0), s).trials;
      ++accepted;
    }
    const double p = std::numbers::pi / 4.0;
    CHECK(std::abs(double(accepted) / trials - p) <= 5.0 * std::sqrt(p * (1 - p) / trials));
  }

  SECTION("f = g with C = 1 accepts every proposal") {
    EnvelopeSpec env = linear_pdf_envelope();
    env.proposal_pdf = env.target_pdf;
    env.constant = 1.0;
    env.proposal_sampler = [](RandomStream& r) { return sample_inverse_transform(inverse::linear_pdf(), r); };
    RandomStream s(9);
    for (int i = 0; i < 1000; ++i) REQUIRE(sample_accept_reject(env, s).trials == 1);
  }

  SECTION("a violated envelope is reported") {
    EnvelopeSpec env = linear_pdf_envelope();
    env.constant = 1.0;  // 2x > 1 on (1/2, 1]
    RandomStream s(10);
    CHECK_THROWS_AS(
        [&] {
          for (int i = 0; i < 1000; ++i) sample_accept_reject(env, s);
        }(),
        model_error);
  }
}

TEST_CASE("Box-Muller") {
  CHECK(std::abs(box_muller(0.25, std::exp(-2.0))) < 1e-15);
  CHECK(box_muller(0.0, std::exp(-2.0)) == Approx(2.0));

  RandomStream s(11);
  const std::size_t n = 100000;
  const auto xs = draw(n, s, [](RandomStream& r) { return sample_standard_normal(r); });
  CHECK(std::abs(mean_of(xs)) <= 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(sample_variance(xs) - 1.0) <= 5.0 * std::sqrt(2.0 / n));
  double below = 0.0;
  for (double x : xs) below += x <= 0.0;
  CHECK(std::abs(below / n - 0.5) <= 5.0 * 0.5 / std::sqrt(double(n)));

  RandomStream a(12), b(12);
  const auto [c, sn] = sample_standard_normal_pair(a);
  CHECK(c == sample_standard_normal(b));
  CHECK(std::isfinite(sn));
}

TEST_CASE("normal by acceptance-rejection with an exponential envelope") {
  RandomStream s(13);
  const std::size_t n = 100000;
  std::size_t rounds = 0;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    const auto d = sample_normal_ar(s);
    x = d.value;
    rounds += d.trials;
  }
  const double p = std::sqrt(std::numbers::pi / (2.0 * std::numbers::e));
  CHECK(std::abs(double(n) / rounds - p) <= 5.0 * std::sqrt(p * (1 - p) / rounds));
  CHECK(std::abs(mean_of(xs)) <= 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(sample_variance(xs) - 1.0) <= 5.0 * std::sqrt(2.0 / n));
  double pos = 0.0;
  for (double x : xs) pos += x > 0.0;
  CHECK(std::abs(pos / n - 0.5) <= 5.0 * 0.5 / std::sqrt(double(n)));
}

TEST_CASE("binomial by normal approximation") {
  RandomStream s(14);
  RunningStats st;
  for (int i = 0; i < 100000; ++i) {
    const long x = sample_binomial_normal_approx(100, 0.4, s);
    REQUIRE(x >= 0);
    REQUIRE(x <= 100);
    st.push(static_cast<double>(x));
  }
  CHECK(std::abs(st.mean() - 40.0) <= 5.0 * std::sqrt(24.0 / 100000));
  CHECK(st.variance() == Approx(24.0).epsilon(0.05));
}

TEST_CASE("poisson sampler, both branches") {
  for (double lam : {0.7, 6.0, 45.0, 400.0}) {
    RandomStream s(15);
    RunningStats st;
    const int n = 100000;
    for (int i = 0; i < n; ++i) st.push(static_cast<double>(sample_poisson(lam, s)));
    CHECK(std::abs(st.mean() - lam) <= 5.0 * std::sqrt(lam / n));
    CHECK(std::abs(st.variance() - lam) <= 5.0 * lam * std::sqrt(2.0 / n) + 5.0 * std::sqrt(lam / n));
  }
  RandomStream s(16);
  CHECK(sample_poisson(0.0, s) == 0);
  CHECK_THROWS_AS(sample_poisson(-1.0, s), std::invalid_argument);
}

TEST_CASE("multivariate normal") {
  SECTION("hand Cholesky of [[1,.5],[.5,1]]") {
    MultiNormalSpec spec({0.0, 0.0}, Matrix{{1.0, 0.5}, {0.5, 1.0}});
    CHECK(spec.factor()(0, 0) == 1.0);
    CHECK(spec.factor()(0, 1) == 0.0);
    CHECK(spec.factor()(1, 0) == 0.5);
    CHECK(spec.factor()(1, 1) == Approx(std::sqrt(0.75)).epsilon(1e-15));

    RandomStream s(17);
    const std::size_t n = 100000;
    const auto xs = sample_multivariate_normal(spec, n, s);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = xs[i][0];
      b[i] = xs[i][1];
    }
    const double tol = 5.0 * std::sqrt(2.0 / n);
    CHECK(std::abs(sample_variance(a) - 1.0) <= tol);
    CHECK(std::abs(sample_variance(b) - 1.0) <= tol);
    CHECK(std::abs(sample_covariance(a, b) - 0.5) <= tol);
    CHECK(std::abs(mean_of(a)) <= 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(mean_of(b)) <= 5.0 / std::sqrt(double(n)));
  }

  SECTION("identity covariance gives independent standard normals") {
    MultiNormalSpec spec({1.0, -2.0}, Matrix::identity(2));
    RandomStream s(18);
    const std::size_t n = 100000;
    const auto xs = sample_multivariate_normal(spec, n, s);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = xs[i][0];
      b[i] = xs[i][1];
    }
    CHECK(std::abs(mean_of(a) - 1.0) <= 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(mean_of(b) + 2.0) <= 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(sample_covariance(a, b)) <= 5.0 / std::sqrt(double(n)));
  }

  SECTION("d = 1 is the scalar path") {
    MultiNormalSpec spec({3.0}, Matrix{{4.0}});
    RandomStream a(19), b(19);
    for (int i = 0; i < 100; ++i) REQUIRE(sample_multivariate_normal(spec, a)[0] == sample_normal(3.0, 2.0, b));
  }

  CHECK_THROWS_AS(MultiNormalSpec({0.0, 0.0}, Matrix{{1.0, 2.0}, {2.0, 1.0}}), numerical_error);
  CHECK_THROWS_AS(MultiNormalSpec({0.0, 0.0}, Matrix{{1.0, 0.5}, {0.4, 1.0}}), numerical_error);
}

TEST_CASE("histogram uses equal-width bins over the sample range") {
  const std::vector<double> xs{0.0, 0.1, 0.5, 0.9, 1.0};
  const auto h = make_histogram(xs, 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.edges[0] == 0.0);
  CHECK(h.edges[1] == 0.5);
  CHECK(h.edges[2] == 1.0);
  CHECK(h.counts == std::vector<std::size_t>{2, 3});
}
