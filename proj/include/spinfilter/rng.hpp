#pragma once

// Counter-based pseudo-random number generation.
//
// Every stochastic quantity in the toolkit is derived from the splitmix64
// output function applied to (seed, counter) pairs, so a (seed, length)
// pair reproduces the same stream bit-for-bit on any platform with IEEE
// doubles:
//
//   u64(k)    = mix64(seed + (k+1) * 0x9E3779B97F4A7C15)
//   u(k)      = (u64(k) >> 11 + 1) * 2^-53          in (0, 1]
//   normal(k) = sqrt(-2 ln u(2k)) * cos(2 pi u(2k+1))   (Box-Muller)

#include <cmath>
#include <cstdint>

namespace spinfilter {

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// k-th raw draw of the stream identified by seed.
inline std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t k) {
  return mix64(seed + (k + 1) * 0x9E3779B97F4A7C15ull);
}

// Uniform draw in (0, 1]; never 0, so it is safe under log().
inline double counter_uniform(std::uint64_t seed, std::uint64_t k) {
  return static_cast<double>((counter_u64(seed, k) >> 11) + 1) * 0x1.0p-53;
}

// k-th standard normal draw of the stream.
inline double counter_normal(std::uint64_t seed, std::uint64_t k) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 = counter_uniform(seed, 2 * k);
  const double u2 = counter_uniform(seed, 2 * k + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace spinfilter
