#pragma once

// Deterministic random number generation.  The standard library's engines are
// portable but its distributions are not (uniform_real_distribution may emit
// different streams on different standard libraries), so sampling here uses a
// fixed bit-level recipe: xoshiro256++ for raw 64-bit output, splitmix64 for
// seeding and stream derivation, and an explicit 53-bit conversion to doubles.
// Identical (seed, stream) pairs therefore produce identical samples on every
// platform.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace opelab {

struct SplitMix64 {
  std::uint64_t state;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : s_) w = sm.next();
  }

  // Independent substream: mixes the stream id into the seed before
  // expansion, so stream k of seed x never collides with stream k' != k.
  static Xoshiro256pp stream(std::uint64_t seed, std::uint64_t stream_id) {
    SplitMix64 sm{seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1))};
    return Xoshiro256pp(sm.next());
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

// Samples an index from a probability vector by inverse CDF walk.  Entries
// must be non-negative and sum to ~1; the final positive entry absorbs any
// rounding slack so the walk always lands.
inline int sample_index(Xoshiro256pp& rng, std::span<const double> probs) {
  const double u = rng.next_double();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;
}

// Standard normal via Box-Muller on the deterministic uniform stream.
inline double next_gaussian(Xoshiro256pp& rng) {
  double u1 = rng.next_double();
  while (u1 <= 0.0) u1 = rng.next_double();
  const double u2 = rng.next_double();
  const double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace opelab
