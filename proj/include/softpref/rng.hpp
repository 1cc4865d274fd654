#pragma once

/**
 * Deterministic randomness.
 *
 * Every random decision in the library flows from one root seed through
 * named derivation: a Seed is a pure value, derive() hashes a purpose
 * string or index into a child Seed, and only leaves turn a Seed into a
 * sequential Stream. Child seeds depend on nothing but the parent value
 * and the derivation key, so consumers can be reordered or parallelized
 * without changing any result.
 *
 * Streams use xoshiro256** seeded via splitmix64; uniform/normal/categorical
 * draws are implemented here rather than with <random> distributions so the
 * byte-level behavior does not depend on the standard library version.
 */

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace softpref::rng {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Seed {
  uint64_t value = 0;

  Seed derive(std::string_view purpose) const {
    uint64_t s = value ^ fnv1a64(purpose);
    return Seed{splitmix64(s)};
  }

  Seed derive(uint64_t index) const {
    uint64_t s = value + 0x632be59bd9b4e019ull * (index + 1);
    return Seed{splitmix64(s)};
  }

  Seed derive(std::string_view purpose, uint64_t index) const {
    return derive(purpose).derive(index);
  }

  friend bool operator==(const Seed&, const Seed&) = default;
};

class Stream {
 public:
  explicit Stream(Seed seed) {
    uint64_t s = seed.value;
    for (auto& w : state_) w = splitmix64(s);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n), n >= 1.
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (-n) % n;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal, Box-Muller trig form: consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Draw an index from a normalized probability vector (inverse-CDF scan).
  size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;  // guard against cumulative rounding
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
};

}  // namespace softpref::rng
