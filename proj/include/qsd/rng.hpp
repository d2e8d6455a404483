#pragma once

#include <array>
#include <cstdint>

namespace qsd {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Pure function of (counter, key); used so every draw is addressed by
/// (seed, particle, step, purpose) instead of by position in a stream.
struct PhiloxKey {
  std::uint32_t k0 = 0;
  std::uint32_t k1 = 0;

  static PhiloxKey from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }
};

using PhiloxCounter = std::array<std::uint32_t, 4>;

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key.k0 += kPhiloxW0;
      key.k1 += kPhiloxW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ key.k0, static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ key.k1, static_cast<std::uint32_t>(p0)};
  }
  return c;
}

/// Counter layout shared by the scalar and SIMD paths.
constexpr PhiloxCounter draw_counter(std::uint32_t lane, std::uint32_t purpose, std::uint64_t step) {
  return {lane, purpose, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
}

/// Uniform on [0,1) with 52 random mantissa bits, taken from the first two output words.
inline double bits_to_unit(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return static_cast<double>(bits) * 0x1.0p-52;
}

inline double philox_uniform(PhiloxKey key, std::uint32_t lane, std::uint32_t purpose, std::uint64_t step) {
  const PhiloxCounter r = philox4x32(draw_counter(lane, purpose, step), key);
  return bits_to_unit(r[0], r[1]);
}

/// Uniform integer in [0, n) from a unit draw.
inline std::uint32_t unit_to_index(double u, std::uint32_t n) {
  const auto i = static_cast<std::uint32_t>(u * n);
  return i < n ? i : n - 1;
}

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of replication r; injective in r for a fixed master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t r) {
  return splitmix64(master_seed + r * 0x9E3779B97F4A7C15ull);
}

}  // namespace qsd
