// SPDX-License-Identifier: Apache-2.0
//
// Deterministic counter-splittable random streams.  A master seed plus a
// small tuple of stream ids (user, slot, quantity, ...) is hashed into an
// independent generator state, so Monte-Carlo trials and per-cell draws are
// reproducible regardless of evaluation order or threading.

#ifndef WPMEC_RNG_HPP
#define WPMEC_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>

namespace wpmec {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// A small, fast generator (xorshift128+ seeded through splitmix64).
class Substream {
 public:
  explicit Substream(uint64_t seed) {
    s0_ = splitmix64(seed);
    s1_ = splitmix64(s0_ ^ 0xD1B54A32D192ED03ULL);
    if (s0_ == 0 && s1_ == 0) s1_ = 1;
  }

  uint64_t next_u64() {
    uint64_t x = s0_;
    const uint64_t y = s1_;
    s0_ = y;
    x ^= x << 23;
    s1_ = x ^ y ^ (x >> 17) ^ (y >> 26);
    return s1_ + y;
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (cached pair).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex Gaussian CN(0,1).
  std::complex<double> cnormal() {
    const double inv_sqrt2 = 0.70710678118654752440;
    const double re = normal();
    const double im = normal();
    return {re * inv_sqrt2, im * inv_sqrt2};
  }

 private:
  uint64_t s0_ = 0, s1_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Derive an independent stream from a master seed and up to four ids.
inline Substream substream(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0,
                           uint64_t d = 0) {
  uint64_t s = splitmix64(master);
  s = splitmix64(s ^ (a * 0x9E3779B97F4A7C15ULL + 0x243F6A8885A308D3ULL));
  s = splitmix64(s ^ (b * 0xC2B2AE3D27D4EB4FULL + 0x13198A2E03707344ULL));
  s = splitmix64(s ^ (c * 0x165667B19E3779F9ULL + 0xA4093822299F31D0ULL));
  s = splitmix64(s ^ (d * 0x27D4EB2F165667C5ULL + 0x082EFA98EC4E6C89ULL));
  return Substream(s);
}

}  // namespace wpmec

#endif  // WPMEC_RNG_HPP
