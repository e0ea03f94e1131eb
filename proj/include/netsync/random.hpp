#pragma once

// Reproducible random streams.
//
// Every stream is keyed by a path of integers below a master seed (for
// example {sweep, trial, purpose, edge}); the same key always yields the
// same stream, independent of evaluation order or thread assignment.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace netsync {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t master_seed) : seed_(master_seed) {}

  std::uint64_t master_seed() const { return seed_; }

  std::uint64_t key(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t h = splitmix64(seed_);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
  }

  Rng stream(std::initializer_list<std::uint64_t> path) const { return Rng(key(path)); }

  /// Child factory rooted at `path`.
  StreamFactory child(std::initializer_list<std::uint64_t> path) const {
    return StreamFactory(key(path));
  }

 private:
  std::uint64_t seed_;
};

/// Uniform draw in [0, 1) with 53 random bits (stable across standard
/// library implementations, unlike std::uniform_real_distribution).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

/// Standard normal draw (Marsaglia polar method on uniform01).
double standard_normal(Rng& rng);

}  // namespace netsync
