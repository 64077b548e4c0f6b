#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "fninv/errors.hpp"

namespace fninv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// f'(x) together with the point it was taken at.
struct JacobianMatrix {
  Matrix entries;
  Vector point;

  Matrix transpose() const { return entries.transpose(); }
  Vector apply(const Vector& z) const { return entries * z; }
};

/// How a VectorMap obtains its Jacobian.
enum class JacobianSource { Exact, FiniteDifference };

/// An evaluatable map R^n -> R^n with an optional exact Jacobian.
///
/// Instances are immutable after construction; copies share the evaluation
/// counters, which are atomic so a map can be handed to concurrent workers.
class VectorMap {
 public:
  using Evaluator = std::function<Vector(const Vector&)>;
  using JacobianFn = std::function<Matrix(const Vector&)>;
  /// True where the map is known not to be differentiable (e.g. an abs kink).
  using KinkFn = std::function<bool(const Vector&)>;

  VectorMap(std::size_t n, Evaluator f, std::string label)
      : n_(n), f_(std::move(f)), label_(std::move(label)), counters_(std::make_shared<Counters>()) {
    if (n_ == 0) throw PreconditionViolation("VectorMap dimension must be positive");
  }

  VectorMap(std::size_t n, Evaluator f, JacobianFn jac, std::string label)
      : VectorMap(n, std::move(f), std::move(label)) {
    jac_ = std::move(jac);
  }

  std::size_t dimension() const noexcept { return n_; }
  const std::string& label() const noexcept { return label_; }
  JacobianSource jacobian_source() const noexcept {
    return jac_ ? JacobianSource::Exact : JacobianSource::FiniteDifference;
  }
  bool has_exact_jacobian() const noexcept { return static_cast<bool>(jac_); }

  /// Relative finite-difference step; the absolute step is fd_scale * (1 + |x|).
  double fd_scale() const noexcept { return fd_scale_; }

  VectorMap with_fd_scale(double scale) const {
    VectorMap copy = *this;
    copy.fd_scale_ = scale;
    return copy;
  }

  VectorMap with_kinks(KinkFn kinks) const {
    VectorMap copy = *this;
    copy.kinks_ = std::move(kinks);
    return copy;
  }

  VectorMap with_label(std::string label) const {
    VectorMap copy = *this;
    copy.label_ = std::move(label);
    return copy;
  }

  /// Drops the exact Jacobian so that jacobian() falls back to differences.
  VectorMap without_exact_jacobian() const {
    VectorMap copy = *this;
    copy.jac_ = nullptr;
    return copy;
  }

  Vector eval(const Vector& x) const {
    check_dimension(x, "eval");
    counters_->evaluations.fetch_add(1, std::memory_order_relaxed);
    Vector y = f_(x);
    if (static_cast<std::size_t>(y.size()) != n_)
      throw DimensionMismatch(n_, static_cast<std::size_t>(y.size()), label_ + " output");
    if (!all_finite(y)) throw NonFiniteOutput(label_ + ": non-finite value at evaluation point");
    return y;
  }

  JacobianMatrix jacobian(const Vector& x) const {
    check_dimension(x, "jacobian");
    counters_->jacobians.fetch_add(1, std::memory_order_relaxed);
    Matrix j = jac_ ? jac_(x) : central_differences(x);
    if (static_cast<std::size_t>(j.rows()) != n_ || static_cast<std::size_t>(j.cols()) != n_)
      throw DimensionMismatch(n_, static_cast<std::size_t>(j.rows()), label_ + " jacobian");
    if (!all_finite(j)) throw NonFiniteOutput(label_ + ": non-finite Jacobian entry");
    return {std::move(j), x};
  }

  /// Central differences with step fd_scale * (1 + |x|), regardless of the
  /// configured Jacobian source.
  Matrix central_differences(const Vector& x) const {
    check_dimension(x, "central_differences");
    const double h = fd_scale_ * (1.0 + x.norm());
    Matrix j(n_, n_);
    Vector xp = x;
    Vector xm = x;
    for (std::size_t k = 0; k < n_; ++k) {
      const auto c = static_cast<Eigen::Index>(k);
      xp[c] = x[c] + h;
      xm[c] = x[c] - h;
      j.col(c) = (eval(xp) - eval(xm)) / (xp[c] - xm[c]);
      xp[c] = x[c];
      xm[c] = x[c];
    }
    return j;
  }

  bool nondifferentiable_at(const Vector& x) const { return kinks_ ? kinks_(x) : false; }
  bool has_kink_information() const noexcept { return static_cast<bool>(kinks_); }

  std::uint64_t evaluation_count() const noexcept {
    return counters_->evaluations.load(std::memory_order_relaxed);
  }
  std::uint64_t jacobian_count() const noexcept {
    return counters_->jacobians.load(std::memory_order_relaxed);
  }

 private:
  struct Counters {
    std::atomic<std::uint64_t> evaluations{0};
    std::atomic<std::uint64_t> jacobians{0};
  };

  void check_dimension(const Vector& x, const char* op) const {
    if (static_cast<std::size_t>(x.size()) != n_)
      throw DimensionMismatch(n_, static_cast<std::size_t>(x.size()), label_ + " " + op);
  }

  std::size_t n_;
  Evaluator f_;
  JacobianFn jac_;
  KinkFn kinks_;
  std::string label_;
  double fd_scale_ = 1e-6;
  std::shared_ptr<Counters> counters_;
};

inline Vector eval(const VectorMap& map, const Vector& x) { return map.eval(x); }
inline JacobianMatrix jacobian(const VectorMap& map, const Vector& x) { return map.jacobian(x); }

/// Determinant through partially pivoted LU.
inline double det(const Matrix& m) {
  if (!all_finite(m)) throw NonFiniteOutput("det: non-finite matrix");
  if (m.rows() == 0) return 1.0;
  return m.partialPivLu().determinant();
}
inline double det(const JacobianMatrix& j) { return det(j.entries); }

inline Vector singular_values(const Matrix& m) {
  if (!all_finite(m)) throw NonFiniteOutput("singular_values: non-finite matrix");
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

/// Smallest singular value; values below 1e-12 * sigma_max are flushed to 0.
inline double min_singular_value(const Matrix& m) {
  const Vector s = singular_values(m);
  if (s.size() == 0) return 0.0;
  const double smax = s[0];
  const double smin = s[s.size() - 1];
  return smin <= 1e-12 * smax ? 0.0 : smin;
}
inline double min_singular_value(const JacobianMatrix& j) { return min_singular_value(j.entries); }

inline double max_singular_value(const Matrix& m) {
  const Vector s = singular_values(m);
  return s.size() == 0 ? 0.0 : s[0];
}
inline double max_singular_value(const JacobianMatrix& j) { return max_singular_value(j.entries); }

/// Largest entrywise relative discrepancy |a-b| / max(1, |b|) between two
/// Jacobians (used to cross-check exact against finite differences).
inline double relative_discrepancy(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      worst = std::max(worst, std::abs(a(i, k) - b(i, k)) / std::max(1.0, std::abs(b(i, k))));
  return worst;
}

}  // namespace fninv
