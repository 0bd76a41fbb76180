#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace llmrerank {

/// 64-bit FNV-1a. Used for prompt keys and for deriving per-user seeds.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Mixes a global seed with a stream label (user id, purpose tag) into an
/// independent seed. Stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// splitmix64-seeded xoshiro256**. The standard distributions are not
/// portable across library implementations, so sampling helpers live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;
  /// Uniform double in [0, 1).
  double uniform01() noexcept;
  double normal(double mean, double stddev) noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

}  // namespace llmrerank
