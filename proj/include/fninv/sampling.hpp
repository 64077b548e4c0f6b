#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "fninv/map_model.hpp"

namespace fninv {

/// SplitMix64 finalizer; derives independent stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded pseudo-random source with the handful of draws the library needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(mix_seed(seed, stream)) {}

  /// Uniform in [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  Vector normal_vector(std::size_t n) {
    Vector v(n);
    for (auto& c : v) c = normal();
    return v;
  }

  /// Uniform on the sphere |x - center| = radius. Normalized Gaussian.
  Vector on_sphere(const Vector& center, double radius) {
    Vector v = normal_vector(static_cast<std::size_t>(center.size()));
    double len = v.norm();
    while (len == 0.0) {
      v = normal_vector(static_cast<std::size_t>(center.size()));
      len = v.norm();
    }
    return center + (radius / len) * v;
  }

  /// Uniform in the closed ball |x - center| <= radius.
  Vector in_ball(const Vector& center, double radius) {
    const auto n = static_cast<double>(center.size());
    const Vector dir = on_sphere(Vector::Zero(center.size()), 1.0);
    return center + radius * std::pow(uniform(), 1.0 / n) * dir;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

namespace detail {

inline std::vector<std::uint32_t> first_primes(std::size_t count) {
  std::vector<std::uint32_t> primes;
  for (std::uint32_t c = 2; primes.size() < count; ++c) {
    bool prime = true;
    for (auto p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

}  // namespace detail

/// Halton sequence with a seeded random digit permutation per base.
///
/// The infinite tail of permuted zero digits is summed in closed form, so the
/// points remain in [0, 1) and stay stratified for any prefix length.
class ScrambledHalton {
 public:
  ScrambledHalton(std::size_t dimension, std::uint64_t seed)
      : bases_(detail::first_primes(dimension)), perms_(dimension) {
    Rng rng(seed, 0x4a17);
    for (std::size_t d = 0; d < dimension; ++d) {
      perms_[d].resize(bases_[d]);
      std::iota(perms_[d].begin(), perms_[d].end(), 0u);
      // Fisher-Yates with our own uniform draws so the permutation does not
      // depend on the standard library's shuffle.
      for (std::size_t i = perms_[d].size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(perms_[d][i - 1], perms_[d][std::min(j, i - 1)]);
      }
    }
  }

  std::size_t dimension() const noexcept { return bases_.size(); }

  /// Point `index` of the sequence in the unit cube.
  Vector unit_point(std::uint64_t index) const {
    Vector p(bases_.size());
    for (std::size_t d = 0; d < bases_.size(); ++d)
      p[static_cast<Eigen::Index>(d)] = radical_inverse(d, index);
    return p;
  }

  /// Point `index` mapped affinely into the box [lo, hi].
  Vector box_point(std::uint64_t index, const Vector& lo, const Vector& hi) const {
    const Vector u = unit_point(index);
    return lo + (hi - lo).cwiseProduct(u);
  }

 private:
  double radical_inverse(std::size_t d, std::uint64_t index) const {
    const std::uint32_t base = bases_[d];
    const auto& perm = perms_[d];
    const double inv_base = 1.0 / base;
    double reversed = 0.0;
    double inv_base_n = 1.0;
    while (index > 0) {
      const std::uint64_t next = index / base;
      const auto digit = static_cast<std::size_t>(index - next * base);
      reversed = reversed * base + perm[digit];
      inv_base_n *= inv_base;
      index = next;
    }
    const double tail = inv_base * perm[0] / (1.0 - inv_base);
    return std::min(inv_base_n * (reversed + tail), 1.0 - 0x1p-53);
  }

  std::vector<std::uint32_t> bases_;
  std::vector<std::vector<std::uint32_t>> perms_;
};

}  // namespace fninv
