#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lect {

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a, optionally continuing from a previous state.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t state = 14695981039346656037ull);

/// Stage-keyed seed derivation. Every random stream in the pipeline is
/// obtained as derive_seed(run_seed, "<stage>", index) so that stages can
/// be reproduced independently of each other.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                          std::uint64_t index = 0);

/// Thin wrapper over mt19937_64 with distribution code owned here, so the
/// produced streams do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lect
