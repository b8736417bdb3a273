#include "patchaudit/rng.hpp"

#include <cmath>

namespace patchaudit {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

SeededRng::SeededRng(uint64_t seed) : seed_(seed) {
  uint64_t x = seed;
  for (auto& word : state_) word = splitmix64(x);
}

uint64_t SeededRng::next_u64() {
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

uint64_t SeededRng::next_below(uint64_t bound) {
  // Draw until the value falls below the largest multiple of bound.
  const uint64_t limit = bound * ((~uint64_t{0}) / bound);
  uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % bound;
}

double SeededRng::next_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  double u1 = next_real();
  while (u1 <= 0.0) u1 = next_real();
  const double u2 = next_real();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  cached_gaussian_ = radius * std::sin(angle);
  has_cached_gaussian_ = true;
  return radius * std::cos(angle);
}

uint64_t SeededRng::derive_seed(std::string_view label) const {
  uint64_t x = seed_ ^ rotl(fnv1a64(label), 32);
  return splitmix64(x);
}

SeededRng SeededRng::derive(std::string_view label) const {
  return SeededRng(derive_seed(label));
}

}  // namespace patchaudit
