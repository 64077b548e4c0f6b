#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fninv/errors.hpp"
#include "fninv/map_model.hpp"
#include "fninv/sampling.hpp"

namespace fninv::maps {

inline VectorMap identity(std::size_t n = 2) {
  return VectorMap(
      n, [](const Vector& x) { return x; },
      [n](const Vector&) { return Matrix(Matrix::Identity(n, n)); }, "identity");
}

/// f_i(x) = x_i^3 + x_i. A global diffeomorphism.
inline VectorMap cubic(std::size_t n = 2) {
  return VectorMap(
      n, [](const Vector& x) { return Vector(x.array().cube() + x.array()); },
      [](const Vector& x) { return Matrix((3.0 * x.array().square() + 1.0).matrix().asDiagonal()); },
      "cubic");
}

/// z -> z^2 on C = R^2. Coercive, but f'(0) = 0 and every w != 0 has two
/// preimages.
inline VectorMap complex_square() {
  return VectorMap(
      2,
      [](const Vector& x) {
        Vector y(2);
        y << x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1];
        return y;
      },
      [](const Vector& x) {
        Matrix j(2, 2);
        j << 2.0 * x[0], -2.0 * x[1], 2.0 * x[1], 2.0 * x[0];
        return j;
      },
      "complex_square");
}

/// z -> e^z on C = R^2. Jacobian nonsingular everywhere, but not coercive
/// (bounded as x1 -> -inf) and 2*pi-periodic in x2.
inline VectorMap complex_exp() {
  return VectorMap(
      2,
      [](const Vector& x) {
        const double r = std::exp(x[0]);
        Vector y(2);
        y << r * std::cos(x[1]), r * std::sin(x[1]);
        return y;
      },
      [](const Vector& x) {
        const double r = std::exp(x[0]);
        const double c = r * std::cos(x[1]);
        const double s = r * std::sin(x[1]);
        Matrix j(2, 2);
        j << c, -s, s, c;
        return j;
      },
      "complex_exp");
}

/// Planar rotation by theta. Orthogonal Jacobian everywhere.
inline VectorMap rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Matrix r(2, 2);
  r << c, -s, s, c;
  return VectorMap(
      2, [r](const Vector& x) { return Vector(r * x); }, [r](const Vector&) { return r; },
      "rotation:" + std::to_string(theta));
}

/// (x1^3 - 3 x1, x2). Coercive and surjective; Jacobian singular on x1 = +-1,
/// and x1^3 - 3 x1 = 0 has three roots.
inline VectorMap fold_cubic() {
  return VectorMap(
      2,
      [](const Vector& x) {
        Vector y(2);
        y << x[0] * x[0] * x[0] - 3.0 * x[0], x[1];
        return y;
      },
      [](const Vector& x) {
        Matrix j = Matrix::Zero(2, 2);
        j(0, 0) = 3.0 * x[0] * x[0] - 3.0;
        j(1, 1) = 1.0;
        return j;
      },
      "fold_cubic");
}

/// x -> A x + b with A = 2I + U, U entries uniform in [-1/2, 1/2] from the
/// seed; A is strictly diagonally dominant, hence invertible.
inline VectorMap affine(std::uint64_t seed, std::size_t n = 2) {
  Rng rng(seed, 0xaff);
  Matrix a = 2.0 * Matrix::Identity(n, n);
  Vector b(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += rng.uniform(-0.5, 0.5) / static_cast<double>(n);
    b[static_cast<Eigen::Index>(i)] = rng.uniform(-1.0, 1.0);
  }
  return VectorMap(
      n, [a, b](const Vector& x) { return Vector(a * x + b); }, [a](const Vector&) { return a; },
      "affine:" + std::to_string(seed));
}

struct RegistryEntry {
  std::string name;
  std::string syntax;
  /// Which global-inverse hypothesis the map violates, or "none".
  std::string violates;
};

inline const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> entries = {
      {"identity", "identity", "none"},
      {"affine", "affine:<seed>", "none"},
      {"cubic", "cubic", "none"},
      {"complex_square", "complex_square", "nonsingular Jacobian (f'(0) = 0); injectivity"},
      {"complex_exp", "complex_exp", "coercivity; injectivity"},
      {"rotation", "rotation:<theta>", "none"},
      {"fold_cubic", "fold_cubic", "nonsingular Jacobian (x1 = +-1); injectivity"},
  };
  return entries;
}

/// Resolves a registry name such as "cubic", "rotation:1.0472" or "affine:3".
inline VectorMap builtin(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::optional<std::string> arg =
      colon == std::string::npos ? std::nullopt : std::optional<std::string>(spec.substr(colon + 1));
  auto no_arg = [&] {
    if (arg) throw PreconditionViolation("builtin map '" + name + "' takes no parameter");
  };
  auto need_arg = [&]() -> const std::string& {
    if (!arg || arg->empty()) throw PreconditionViolation("builtin map '" + name + "' needs a parameter");
    return *arg;
  };
  try {
    if (name == "identity") {
      no_arg();
      return identity();
    }
    if (name == "cubic") {
      no_arg();
      return cubic();
    }
    if (name == "complex_square") {
      no_arg();
      return complex_square();
    }
    if (name == "complex_exp") {
      no_arg();
      return complex_exp();
    }
    if (name == "fold_cubic") {
      no_arg();
      return fold_cubic();
    }
    if (name == "rotation") {
      std::size_t used = 0;
      const std::string& a = need_arg();
      const double theta = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      return rotation(theta).with_label("rotation:" + a);
    }
    if (name == "affine") {
      std::size_t used = 0;
      const std::string& a = need_arg();
      const auto seed = std::stoull(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      return affine(seed);
    }
  } catch (const std::invalid_argument&) {
    throw PreconditionViolation("bad parameter in builtin map '" + spec + "'");
  } catch (const std::out_of_range&) {
    throw PreconditionViolation("bad parameter in builtin map '" + spec + "'");
  }
  throw PreconditionViolation("unknown builtin map '" + spec + "'");
}

}  // namespace fninv::maps
