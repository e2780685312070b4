#include <catch_amalgamated.hpp>

#include <algorithm>
#include <iterator>
#include <cmath>
#include <vector>

#include "simlab/montecarlo.hpp"
#include "simlab/rng.hpp"

using simlab::RandomStream;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using simlab::detail::philox4x32_10;
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same seed and stream reproduce the sequence bit for bit") {
  for (std::uint64_t seed : {0ull, 1ull, 0xdeadbeefull}) {
    RandomStream a(seed, 7), b(seed, 7);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_uniform() == b.next_uniform());
    CHECK(a.counter() == 100);
  }
}

TEST_CASE("draws lie in [0,1) and have mean 1/2") {
  RandomStream s(42);
  const int n = 1'000'000;
  double sum = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_uniform();
    sum += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / n - 0.5) <= 5.0 * (1.0 / std::sqrt(12.0)) / std::sqrt(double(n)));
}

TEST_CASE("100-bin histogram of 1e6 draws stays within 5 sigma per bin") {
  RandomStream s(3);
  const int n = 1'000'000;
  std::vector<int> bins(100, 0);
  for (int i = 0; i < n; ++i) ++bins[static_cast<int>(s.next_uniform() * 100)];
  const double expected = n / 100.0;
  const double sd = std::sqrt(n * 0.01 * 0.99);
  for (int c : bins) CHECK(std::abs(c - expected) <= 5.0 * sd);
}

TEST_CASE("uniform_on maps onto [a,b)") {
  RandomStream a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform_on(0.0, 1.0) == b.next_uniform());

  RandomStream s(10);
  for (int i = 0; i < 10000; ++i) {
    const double x = s.uniform_on(2.0, 2.000001);
    REQUIRE(x >= 2.0);
    REQUIRE(x < 2.000001);
  }

  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += s.uniform_on(-1.0, 1.0);
  CHECK(std::abs(sum / n) <= 5.0 * (2.0 / std::sqrt(12.0)) / std::sqrt(double(n)));

  CHECK_THROWS_AS(s.uniform_on(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(s.uniform_on(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("open uniforms avoid both endpoints") {
  RandomStream s(11);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.next_open_uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("substreams are distinct and reproducible") {
  RandomStream root(5);
  RandomStream s0 = root.spawn_substream(0), s1 = root.spawn_substream(1);
  CHECK(s0.stream_id() != s1.stream_id());
  CHECK(s0.next_u64() != s1.next_u64());

  RandomStream a = root.spawn_substream(0), b = root.spawn_substream(1);
  std::vector<std::uint64_t> xa, xb;
  for (int i = 0; i < 10000; ++i) {
    xa.push_back(a.next_u64());
    xb.push_back(b.next_u64());
  }
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  std::vector<std::uint64_t> common;
  std::set_intersection(xa.begin(), xa.end(), xb.begin(), xb.end(), std::back_inserter(common));
  CHECK(common.empty());

  RandomStream c = root.spawn_substream(3), d = root.spawn_substream(3);
  for (int i = 0; i < 100; ++i) REQUIRE(c.next_uniform() == d.next_uniform());

  // Spawning does not consume draws from the parent.
  RandomStream fresh(5);
  CHECK(root.next_u64() == fresh.next_u64());
}

TEST_CASE("substream ids are injective in the worker index") {
  RandomStream root(1, 99);
  std::vector<std::uint64_t> ids;
  for (std::uint64_t w = 0; w < 5000; ++w) ids.push_back(root.spawn_substream(w).stream_id());
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("sharded estimate agrees with the serial one") {
  auto g = [](double x) { return std::sin(x); };
  auto sampler = [](RandomStream& s) { return s.next_uniform(); };
  RandomStream serial(21);
  const auto a = simlab::estimate_mean(g, sampler, 200000, serial, 0.99);
  const auto b = simlab::estimate_mean_sharded(g, sampler, 200000, 8, RandomStream(21), 0.99);
  CHECK(b.n == 200000);
  CHECK(std::abs(a.mean - b.mean) <= a.half_width + b.half_width);
  CHECK(b.covers(a.mean));
  CHECK(a.covers(b.mean));

  const auto again = simlab::estimate_mean_sharded(g, sampler, 200000, 8, RandomStream(21), 0.99);
  CHECK(again.mean == b.mean);
}
