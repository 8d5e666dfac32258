#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace sbx {

/// SplitMix64 generator. Every random decision in the toolkit (splits,
/// shuffles, weight init, synthetic data) is drawn from this stream so that
/// other implementations can reproduce it bit for bit:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// Derived draws:
///   uniform()      = (next() >> 11) * 2^-53            in [0, 1)
///   below(n)       = floor(uniform() * n)              in [0, n)
///   normal()       = Box-Muller on u1 = 1 - uniform(), u2 = uniform(),
///                    returns sqrt(-2 ln u1) * cos(2 pi u2) (one value per call)
///   shuffle(v)     = Fisher-Yates, i from n-1 down to 1, swap(v[i], v[below(i+1)])
///   fork(tag)      = SplitMix64(next() ^ tag)
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

  SplitMix64 fork(std::uint64_t tag) { return SplitMix64(next() ^ tag); }

 private:
  std::uint64_t state_;
};

}  // namespace sbx
