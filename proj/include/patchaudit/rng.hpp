#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace patchaudit {

// Deterministic xoshiro256** stream seeded through splitmix64. The generator
// and every derived quantity (bounded ints, reals, gaussians, shuffles) are
// pinned here so that a seed produces the same stream on every platform.
// Reports echo kAlgorithm so results stay attributable to a generator version.
class SeededRng {
public:
  static constexpr std::string_view kAlgorithm = "xoshiro256ss-v1";

  explicit SeededRng(uint64_t seed);

  uint64_t seed() const { return seed_; }

  uint64_t next_u64();

  // Unbiased integer in [0, bound), bound >= 1. Rejection sampling on the
  // top bits, so the result does not depend on platform integer division.
  uint64_t next_below(uint64_t bound);

  // Real in [0, 1) with 53 random bits.
  double next_real();

  // Standard normal via Box-Muller. Pairs are cached.
  double next_gaussian();

  // Independent child stream; the label keeps unrelated consumers from
  // colliding even when they share a seed.
  SeededRng derive(std::string_view label) const;
  uint64_t derive_seed(std::string_view label) const;

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

private:
  std::array<uint64_t, 4> state_{};
  uint64_t seed_ = 0;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace patchaudit
