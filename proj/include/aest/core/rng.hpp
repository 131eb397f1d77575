#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace aest {

/// splitmix64 finalizer; the mixing step behind all seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a root seed and a path of stream
/// counters, e.g. derive_seed(seed, {replica, n}). Pure function of inputs.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

/// Seeded random source. Every random draw in the library goes through one
/// of these, and each is created from a derived seed, never shared.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng child(std::uint64_t stream) const { return Rng(derive_seed(seed_, {stream})); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  std::size_t index(std::size_t count) {
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace aest
