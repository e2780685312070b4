#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "simlab/scenarios.hpp"

using namespace simlab;
using Catch::Approx;

namespace {

bool within_ci(const EstimateReport& r, double exact, double slack = 0.0) {
  return std::abs(r.mean - exact) <= r.half_width + slack;
}

// Expected rolls to finish, by iterating the first-step equations of the
// absorbing chain to a fixed point.
double expected_rolls(const SnakesBoard& b) {
  std::vector<double> e(static_cast<std::size_t>(b.size) + 1, 0.0);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double change = 0.0;
    for (int s = b.size - 1; s >= 1; --s) {
      double acc = 1.0;
      int stay = 0;
      for (int r = 1; r <= 6; ++r) {
        int d = s + r;
        if (d > b.size) {
          ++stay;
          continue;
        }
        if (auto it = b.jumps.find(d); it != b.jumps.end()) d = it->second;
        acc += e[static_cast<std::size_t>(d)] / 6.0;
      }
      const double v = acc / (1.0 - stay / 6.0);
      change = std::max(change, std::abs(v - e[static_cast<std::size_t>(s)]));
      e[static_cast<std::size_t>(s)] = v;
    }
    if (change < 1e-12) break;
  }
  return e[static_cast<std::size_t>(b.start)];
}

double delta_quadrature(double t) {
  auto w = [t](double x) { return std::exp(-0.5 * (x - t) * (x - t)) / (1.0 + x * x); };
  const double num = oracle::simpson([&](double x) { return x * w(x); }, t - 14.0, t + 14.0, 20000);
  const double den = oracle::simpson(w, t - 14.0, t + 14.0, 20000);
  return num / den;
}

}  // namespace

TEST_CASE("registry lists every named scenario") {
  const std::vector<std::string> expected{
      "brownian_hitting",   "decay_deterministic", "decay_ssa",          "european_call",
      "four_state_chain",   "gamblers_ruin",       "lotka_volterra",     "mc_expquad",
      "mc_pi",              "mc_sin",              "mh_bivariate",       "michaelis_menten",
      "monty_hall",         "normal_cauchy_delta", "normal_cdf_importance", "normal_cdf_naive",
      "portfolio_var",      "purchase_funnel",     "random_walk_1d",     "random_walk_2d",
      "random_walk_3d",     "recovery_rate",       "recovery_two_group", "sir_ode",
      "sir_ssa",            "snakes_ladders",      "startup_valuation",  "weather_chain"};
  CHECK(scenario_names() == expected);
  for (const auto& s : scenario_registry()) CHECK_FALSE(s.summary.empty());
}

TEST_CASE("unknown scenarios and parameters are rejected") {
  try {
    run_scenario("no_such_thing", {}, RandomStream(1));
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("no_such_thing") != std::string::npos);
    CHECK(msg.find("monty_hall") != std::string::npos);
    CHECK(msg.find("weather_chain") != std::string::npos);
  }
  CHECK_THROWS_AS(run_scenario("monty_hall", {{"bogus", 1}}, RandomStream(1)), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario("monty_hall", {{"n", 10.5}}, RandomStream(1)), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario("monty_hall", {{"n", 0}}, RandomStream(1)), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario("monty_hall", {{"n", NAN}}, RandomStream(1)), std::invalid_argument);
  CHECK_THROWS_AS(run_scenario("gamblers_ruin", {{"k", 100}}, RandomStream(1)), std::invalid_argument);
}

TEST_CASE("resolved parameters overlay the defaults") {
  const auto& info = find_scenario("gamblers_ruin");
  const auto p = resolve_params(info, {{"k", 10}});
  CHECK(p["k"] == 10);
  CHECK(p["target"] == 100);
  CHECK(p.values().size() == info.defaults.size());
}

TEST_CASE("scenarios are deterministic for a fixed seed") {
  for (const char* name : {"gamblers_ruin", "decay_ssa", "monty_hall", "sir_ssa", "recovery_rate"}) {
    const auto a = run_scenario(name, {}, RandomStream(7));
    const auto b = run_scenario(name, {}, RandomStream(7));
    CHECK(a.estimate.mean == b.estimate.mean);
    CHECK(a.table.rows == b.table.rows);
    const auto c = run_scenario(name, {}, RandomStream(8));
    CHECK(c.table.rows.size() == a.table.rows.size());
  }
}

TEST_CASE("Monty Hall switching wins two thirds of the time") {
  const auto r = run_scenario("monty_hall", {{"n", 100000}}, RandomStream(1));
  CHECK(within_ci(r.estimate, 2.0 / 3.0));
  CHECK(r.estimate.mean + r.extra("stay_win") == Approx(1.0));
  CHECK(r.table.rows.size() == 2);
}

TEST_CASE("Monty Hall host never opens the car or the picked door") {
  // Switching wins exactly when the first pick was wrong.
  RandomStream a(3), b(3);
  std::size_t wins = 0, wrong_first = 0;
  for (int k = 0; k < 30000; ++k) {
    const int car = static_cast<int>(3.0 * b.next_uniform());
    const int pick = static_cast<int>(3.0 * b.next_uniform());
    if (car == pick) b.next_uniform();
    wrong_first += car != pick;
    wins += monty_hall_switch_wins(a);
  }
  CHECK(wins == wrong_first);
}

TEST_CASE("normal-Cauchy estimator") {
  const auto r = run_scenario("normal_cauchy_delta", {{"n", 20000}}, RandomStream(2));
  CHECK(r.estimate.mean == 0.0);
  REQUIRE(r.table.rows.size() == 3);
  CHECK(r.table.rows[0][1] == 0.0);
  for (std::size_t i = 1; i < 3; ++i) {
    const double t = r.table.rows[i][0];
    const double exact = delta_quadrature(t);
    CHECK(std::abs(r.table.rows[i][1] - exact) <= 1.5 * r.table.rows[i][3]);
    CHECK(r.table.rows[i][5] > 0.0);
  }
  CHECK(delta_quadrature(0.0) == Approx(0.0).margin(1e-12));
  RandomStream s(4);
  const auto d = normal_cauchy_delta(2.0, 50000, s);
  CHECK(std::abs(d.value - delta_quadrature(2.0)) <= 1.5 * d.half_width);
}

TEST_CASE("snakes and ladders board rules") {
  SnakesBoard bare;
  bare.size = 7;
  bare.jumps.clear();
  // From square 1 only a six finishes: geometric with mean 6.
  const auto r = run_scenario("snakes_ladders", {{"n", 20000}, {"k", 1}}, RandomStream(5), ScenarioContext{bare});
  CHECK(within_ci(r.estimate, 6.0, 0.02));
  CHECK(r.extra("p_equal_k") == Approx(1.0 / 6.0).margin(0.01));
  CHECK(r.extra("p_at_most_k") == r.extra("p_equal_k"));
  CHECK(expected_rolls(bare) == Approx(6.0));

  SnakesBoard bad = bare;
  bad.jumps = {{3, 5}, {5, 2}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.jumps = {{3, 9}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.jumps = {{7, 2}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.jumps.clear();
  bad.start = 7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(SnakesBoard::classic().validate());
}

TEST_CASE("snakes and ladders mean matches the absorbing-chain value") {
  const auto board = SnakesBoard::classic();
  const auto r = run_scenario("snakes_ladders", {{"n", 20000}}, RandomStream(6));
  CHECK(within_ci(r.estimate, expected_rolls(board)));
  double total = 0.0;
  for (const auto& row : r.table.rows) total += row[1];
  CHECK(total == 20000.0);
  CHECK(r.extra("p_at_most_k") >= r.extra("p_equal_k"));
}

TEST_CASE("integration scenarios bracket their exact values") {
  const auto s = run_scenario("mc_sin", {}, RandomStream(9));
  CHECK(std::abs(s.estimate.mean - (1.0 - std::cos(1.0))) <= 5.0 * s.estimate.sample_std / std::sqrt(1e5));
  const auto p = run_scenario("mc_pi", {}, RandomStream(9));
  CHECK(within_ci(p.estimate, std::numbers::pi));
  const auto e = run_scenario("mc_expquad", {}, RandomStream(9));
  CHECK(std::abs(e.estimate.mean - 12.0) <= 1.5 * e.estimate.half_width);
  const auto reps = run_scenario("mc_sin", {{"reps", 20}, {"n", 1000}}, RandomStream(9));
  CHECK(reps.table.rows.size() == 20);
  CHECK(reps.estimate.n == 20);
  CHECK(within_ci(reps.estimate, 1.0 - std::cos(1.0), 1e-3));
}

TEST_CASE("normal tail scenarios") {
  const auto naive = run_scenario("normal_cdf_naive", {{"n", 100000}}, RandomStream(10));
  CHECK(within_ci(naive.estimate, 0.5, 1e-3));
  const auto is = run_scenario("normal_cdf_importance", {}, RandomStream(10));
  CHECK(is.extra("relative_error") < 1e-2);
  CHECK(is.extra("exact") == Approx(oracle::normal_cdf(-4.5)));
  CHECK(is.extra("is_variance") < 1e-3 * 3.4e-6);
  CHECK_THROWS_AS(run_scenario("normal_cdf_importance", {{"t", 1.0}}, RandomStream(1)), std::invalid_argument);
}

TEST_CASE("chain scenarios report exact matrix-power values") {
  const auto w = run_scenario("weather_chain", {}, RandomStream(11));
  CHECK(w.extra("exact") == Approx(n_step_matrix(chains::weather(), 5)(0, 2)));
  CHECK(within_ci(w.estimate, w.extra("exact"), 0.005));
  CHECK(w.extra("stationary_rainy") == Approx(0.4).margin(1e-8));
  CHECK(w.table.rows[1][1] == 0.25);
  CHECK(w.table.rows[1][2] == 0.5);
  CHECK(w.table.rows[2][3] == 0.375);

  const auto f = run_scenario("purchase_funnel", {}, RandomStream(11));
  CHECK(within_ci(f.estimate, f.extra("exact"), 0.005));
  CHECK(f.notes.front().find("reducible") != std::string::npos);

  const auto four = run_scenario("four_state_chain", {}, RandomStream(11));
  const oracle::Mat m{{0.25, 0.25, 0.0, 0.5}, {0.0, 1.0, 0.0, 0.0}, {0.5, 0.0, 0.5, 0.0}, {0.25, 0.25, 0.25, 0.25}};
  CHECK(four.extra("exact") == Approx(oracle::path_sum(m, 2, 1, 2)));
  CHECK(four.table.rows.size() == 16);
}

TEST_CASE("process scenarios") {
  const auto g = run_scenario("gamblers_ruin", {{"n", 4000}}, RandomStream(12));
  CHECK(within_ci(g.estimate, 0.7, 0.005));
  const auto w = run_scenario("random_walk_1d", {{"steps", 1000}, {"reps", 400}}, RandomStream(12));
  CHECK(within_ci(w.estimate, 0.0, 1.0));
  const auto w3 = run_scenario("random_walk_3d", {{"steps", 500}, {"reps", 400}}, RandomStream(12));
  CHECK(within_ci(w3.estimate, 500.0, 20.0));
  CHECK(w3.table.columns.size() == 5);
  const auto c = run_scenario("european_call", {{"n", 4000}, {"dt", 0.01}}, RandomStream(12));
  CHECK(c.extra("black_scholes") == Approx(oracle::black_scholes_call(102, 100, 0.04, 0.3, 0.5)));
  CHECK(within_ci(c.estimate, c.extra("black_scholes"), 0.1));
  const auto s = run_scenario("startup_valuation", {{"n", 2000}}, RandomStream(12));
  CHECK(within_ci(s.estimate, gamblers_ruin_exact(5, 50, 0.6), 0.005));
}

TEST_CASE("kinetic scenarios") {
  const auto d = run_scenario("decay_deterministic", {}, RandomStream(0));
  CHECK(std::abs(d.estimate.mean - 135.3353) < 1e-2);
  const auto mm = run_scenario("michaelis_menten", {{"reps", 20}}, RandomStream(13));
  CHECK(mm.extra("conservation_violations") == 0.0);
  CHECK(mm.extra("states_checked") > 1000.0);
  const auto ode = run_scenario("sir_ode", {}, RandomStream(0));
  CHECK(ode.estimate.mean == Approx(95.98).margin(0.02));
  CHECK(ode.extra("peak_time") == Approx(30.70).margin(0.05));
  const auto lv = run_scenario("lotka_volterra", {{"reps", 3}, {"t_final", 5}}, RandomStream(13));
  CHECK(lv.table.columns.size() == 5);
}

TEST_CASE("Bayesian scenarios") {
  const auto r = run_scenario("recovery_rate", {}, RandomStream(14));
  CHECK(std::abs(r.estimate.mean - 0.15) < 0.01);
  CHECK(r.extra("conjugate_mean") == 12.0 / 80.0);
  CHECK(r.table.rows.size() == 9000);
  const auto two = run_scenario("recovery_two_group", {}, RandomStream(14));
  CHECK(std::abs(two.estimate.mean - 12.0 / 114.0) < 0.01);
  CHECK(std::abs(two.extra("group1_mean") - 0.15) < 0.01);
  CHECK(two.extra("group2_conjugate_mean") == 12.0 / 114.0);
  const auto mh = run_scenario("mh_bivariate", {{"n", 100000}}, RandomStream(14));
  CHECK(std::abs(mh.estimate.mean - 1.85997) < 0.1);
}
