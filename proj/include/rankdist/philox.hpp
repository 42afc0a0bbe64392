#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw is
// a pure function of (key, counter), so a particle's shock at a given step
// does not depend on how the particles are split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rankdist {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Uniform in the open interval (0, 1).
constexpr double to_unit_open(std::uint32_t x) noexcept {
  return (static_cast<double>(x) + 0.5) * (1.0 / 4294967296.0);
}

/// Draws keyed by a 64-bit seed and addressed by (stream, index).
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Philox4x32::Counter raw(std::uint64_t stream, std::uint64_t index) const noexcept {
    return Philox4x32::block({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                              static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                             key_);
  }

  /// One standard normal (Box-Muller on the first two words).
  double normal(std::uint64_t stream, std::uint64_t index) const noexcept {
    const auto r = raw(stream, index);
    return box_muller(r[0], r[1]);
  }

  /// Two independent standard normals (both Box-Muller outputs).
  struct NormalPair {
    double first;
    double second;
  };
  NormalPair normal_pair(std::uint64_t stream, std::uint64_t index) const noexcept {
    const auto r = raw(stream, index);
    const double radius = std::sqrt(-2.0 * std::log(to_unit_open(r[0])));
    const double angle = 2.0 * std::numbers::pi * to_unit_open(r[1]);
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// A standard normal and an independent open-interval uniform.
  struct NormalUniform {
    double z;
    double u;
  };
  NormalUniform normal_and_uniform(std::uint64_t stream, std::uint64_t index) const noexcept {
    const auto r = raw(stream, index);
    return {box_muller(r[0], r[1]), to_unit_open(r[2])};
  }

 private:
  static double box_muller(std::uint32_t a, std::uint32_t b) noexcept {
    const double u1 = to_unit_open(a);
    const double u2 = to_unit_open(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Philox4x32::Key key_;
};

}  // namespace rankdist
