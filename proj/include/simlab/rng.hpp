#pragma once

// Counter-based uniform source. Every draw is a pure function of
// (seed, stream_id, counter), so substreams can be derived without
// handing state between workers.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace simlab {

namespace detail {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Bijective in the
/// counter for a fixed key.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Seeded uniform [0,1) source. Single owner: do not share one stream
/// between concurrent workers; spawn a substream per worker instead.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  /// Raw 64-bit block for the current counter; advances the counter.
  std::uint64_t next_u64() {
    const auto out = detail::philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
         static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    ++counter_;
    return static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
  }

  /// Uniform on [0,1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0,1): the 53-bit grid shifted by half a
  /// step. For inverse-cdf maps that diverge at 0 or 1.
  double next_open_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [a,b). Throws if a >= b.
  double uniform_on(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("uniform_on: require a < b");
    const double x = a + (b - a) * next_uniform();
    // Rounding in a + (b-a)u can land on b for very narrow intervals.
    return x < b ? x : std::nextafter(b, a);
  }

  /// Child stream. For a fixed parent the child id is injective in
  /// worker_index; the child starts at counter 0.
  RandomStream spawn_substream(std::uint64_t worker_index) const {
    const std::uint64_t base = detail::mix64(stream_id_ ^ 0x5851F42D4C957F2Dull);
    return RandomStream(seed_, detail::mix64(base + worker_index));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

}  // namespace simlab
