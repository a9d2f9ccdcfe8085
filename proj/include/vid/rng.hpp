// Deterministic random number generation.
//
// Two flavors are used: a sequential stream (SplitMix64 chain) for code that
// consumes randomness in one fixed order, and counter-based draws keyed by
// (seed, ids...) for code that must be parallelizable without losing
// reproducibility (random-walk steps, per-record synthesis). Nothing here
// depends on implementation-defined std <random> distributions, so identical
// seeds give identical bytes on any platform.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace vid {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive mixing of a key tuple into one 64-bit value.
inline std::uint64_t mix_key(std::uint64_t a) {
  std::uint64_t s = a;
  return splitmix64(s);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = mix_key(a) ^ (b + 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = mix_key(a, b) ^ (c + 0xD1B54A32D192ED03ULL);
  return splitmix64(s);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d) {
  std::uint64_t s = mix_key(a, b, c) ^ (d + 0x8CB92BA72F3D8DD7ULL);
  return splitmix64(s);
}

// FNV-1a, used to fold short stream labels into seeds.
inline std::uint64_t hash_str(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s != '\0'; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline double u64_to_unit(std::uint64_t x) {
  // 53 high bits -> [0, 1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Single counter-based uniform draw in [0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return u64_to_unit(mix_key(seed, a, b, c));
}

// Sequential generator. Stateful but cheap to fork: derive a child stream via
// Rng(mix_key(seed, label)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that adjacent seeds do not share a prefix.
    splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double next_unit() { return u64_to_unit(next_u64()); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double next_gaussian() {
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace vid
