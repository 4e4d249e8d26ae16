#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace projlab {

/// Side length 2^-level of a dyadic cube.
inline double dyadic(int level) { return std::ldexp(1.0, -level); }

/// Inverse of dyadic(): the level n with delta = 2^-n. Throws a domain error
/// when delta is not a power of two in (0, 1].
int level_of(double delta);

/// Ancestor index of a lattice coordinate `shift` levels up (floor division
/// by 2^shift, also for negative indices).
inline std::int64_t ancestor(std::int64_t index, int shift) {
  return shift >= 0 ? (index >> shift) : (index * (std::int64_t{1} << -shift));
}

/// Budget floor(2^{levels * exponent}) used by every (delta, s) counting
/// condition, never below 1.
std::int64_t counting_cap(int levels, double exponent);

/// Tolerance used for all budget / exponent comparisons.
inline constexpr double kSlack = 1e-12;

/// Seeded generator. Built on mt19937_64 whose output sequence is fixed by the
/// standard; the distribution helpers are spelled out here so results do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace projlab
