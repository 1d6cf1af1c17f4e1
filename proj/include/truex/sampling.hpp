#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace truex {

// Uniform integer in [0, n) by rejection on the raw 64-bit stream. Unlike
// std::uniform_int_distribution the result is the same on every standard
// library, which keeps sampled artifacts byte-identical across platforms.
inline uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <class T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace truex
