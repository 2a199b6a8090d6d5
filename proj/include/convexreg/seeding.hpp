#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace convexreg {

// splitmix64 finalizer; used to derive independent streams from tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) {
    h = mix64(h ^ mix64(p));
  }
  return h;
}

using Rng = std::mt19937_64;

// Fixed-order pairwise summation: the result depends only on the values and
// their order, never on how the caller produced them.
inline double pairwise_sum(std::span<const double> values) noexcept {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean and standard error of the mean, both via pairwise sums.
MeanStderr mean_and_stderr(std::span<const double> values);

}  // namespace convexreg
