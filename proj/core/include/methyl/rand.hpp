#pragma once

#include <cstdint>
#include <random>

namespace methyl {

// Uniform draw from [0, n) by rejection. std::uniform_int_distribution is
// implementation-defined, so seeded runs would differ across standard
// libraries; mt19937_64's raw output is pinned by the standard.
inline uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform draw from [lo, hi], inclusive.
inline int64_t uniform_range(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(hi - lo) + 1));
}

}  // namespace methyl
