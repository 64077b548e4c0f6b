#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "fninv/errors.hpp"
#include "fninv/map_model.hpp"

namespace fninv {

/// Lower-bound parameters eta(x) >= c |x|^alpha for |x| <= bigm.
struct GaugeBound {
  double c = 0.0;
  double alpha = 0.0;
  double bigm = 0.0;
};

/// A nonnegative functional eta with eta(0) = 0, used to measure residuals.
///
/// The built-ins are 1/2 |r|^2 and the componentwise power (1/p) sum |r_i|^p.
/// Custom gauges carry their own gradient; nothing about them is assumed.
class Gauge {
 public:
  enum class Kind { HalfSqEuclid, PPower, Custom };
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;

  static Gauge half_sq_euclid() {
    Gauge g;
    g.kind_ = Kind::HalfSqEuclid;
    g.p_ = 2.0;
    return g;
  }

  static Gauge p_power(double p) {
    if (!(p >= 1.0)) throw PreconditionViolation("p_power gauge needs p >= 1");
    Gauge g;
    g.kind_ = Kind::PPower;
    g.p_ = p;
    return g;
  }

  static Gauge custom(ValueFn value, GradientFn gradient, std::string name, bool smooth = true) {
    Gauge g;
    g.kind_ = Kind::Custom;
    g.value_ = std::move(value);
    g.gradient_ = std::move(gradient);
    g.name_ = std::move(name);
    g.custom_smooth_ = smooth;
    return g;
  }

  Gauge with_bound(GaugeBound b) const {
    Gauge g = *this;
    g.bound_ = b;
    return g;
  }

  Kind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }
  const std::optional<GaugeBound>& bound() const noexcept { return bound_; }

  std::string name() const {
    switch (kind_) {
      case Kind::HalfSqEuclid: return "half_sq_euclid";
      case Kind::PPower: return "p_power(" + format_p() + ")";
      case Kind::Custom: return name_;
    }
    return name_;
  }

  double value(const Vector& r) const {
    switch (kind_) {
      case Kind::HalfSqEuclid: return 0.5 * r.squaredNorm();
      case Kind::PPower: return r.array().abs().pow(p_).sum() / p_;
      case Kind::Custom: return value_(r);
    }
    return 0.0;
  }

  Vector gradient(const Vector& r) const {
    switch (kind_) {
      case Kind::HalfSqEuclid: return r;
      case Kind::PPower: {
        Vector g(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) {
          const double a = std::abs(r[i]);
          g[i] = a == 0.0 ? 0.0 : std::copysign(std::pow(a, p_ - 1.0), r[i]);
        }
        return g;
      }
      case Kind::Custom: return gradient_(r);
    }
    return r;
  }

  /// False where the gauge is only locally Lipschitz at r: a zero component
  /// of a p-power gauge with p < 2 (the gradient there is a convention).
  bool smooth_at(const Vector& r) const {
    if (kind_ == Kind::PPower && p_ < 2.0) return (r.array() != 0.0).all();
    if (kind_ == Kind::Custom) return custom_smooth_;
    return true;
  }

  /// C^1 everywhere (p >= 2 for the power gauge).
  bool continuously_differentiable() const {
    if (kind_ == Kind::PPower) return p_ >= 2.0;
    if (kind_ == Kind::Custom) return custom_smooth_;
    return true;
  }

 private:
  Gauge() = default;

  std::string format_p() const {
    std::string s = std::to_string(p_);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  Kind kind_ = Kind::HalfSqEuclid;
  double p_ = 2.0;
  ValueFn value_;
  GradientFn gradient_;
  std::string name_;
  bool custom_smooth_ = true;
  std::optional<GaugeBound> bound_;
};

/// phi(x) = eta(f(x) - y).
class MeritFunction {
 public:
  MeritFunction(VectorMap map, Vector target, Gauge gauge)
      : map_(std::move(map)), target_(std::move(target)), gauge_(std::move(gauge)) {
    if (static_cast<std::size_t>(target_.size()) != map_.dimension())
      throw DimensionMismatch(map_.dimension(), static_cast<std::size_t>(target_.size()), "merit target");
  }

  const VectorMap& map() const noexcept { return map_; }
  const Vector& target() const noexcept { return target_; }
  const Gauge& gauge() const noexcept { return gauge_; }
  std::size_t dimension() const noexcept { return map_.dimension(); }

  Vector residual(const Vector& x) const { return map_.eval(x) - target_; }

  double value(const Vector& x) const { return gauge_.value(residual(x)); }

  /// f'(x)^T eta'(f(x) - y).
  Vector gradient(const Vector& x) const {
    const Vector r = residual(x);
    return map_.jacobian(x).entries.transpose() * gauge_.gradient(r);
  }

  /// True when both the map and the gauge are differentiable at x.
  bool smooth_at(const Vector& x) const {
    if (map_.nondifferentiable_at(x)) return false;
    if (gauge_.continuously_differentiable()) return true;
    return gauge_.smooth_at(residual(x));
  }

 private:
  VectorMap map_;
  Vector target_;
  Gauge gauge_;
};

inline double merit_value(const MeritFunction& m, const Vector& x) { return m.value(x); }
inline Vector merit_gradient(const MeritFunction& m, const Vector& x) { return m.gradient(x); }

/// g(x) = f(x + shift) - offset, with g'(x) = f'(x + shift).
inline VectorMap shift_map(const VectorMap& map, const Vector& shift, const Vector& offset) {
  const std::size_t n = map.dimension();
  if (static_cast<std::size_t>(shift.size()) != n)
    throw DimensionMismatch(n, static_cast<std::size_t>(shift.size()), "shift_map shift");
  if (static_cast<std::size_t>(offset.size()) != n)
    throw DimensionMismatch(n, static_cast<std::size_t>(offset.size()), "shift_map offset");
  VectorMap shifted = map.has_exact_jacobian()
                          ? VectorMap(
                                n, [map, shift, offset](const Vector& x) { return Vector(map.eval(x + shift) - offset); },
                                [map, shift](const Vector& x) { return map.jacobian(x + shift).entries; },
                                map.label() + " (shifted)")
                          : VectorMap(
                                n, [map, shift, offset](const Vector& x) { return Vector(map.eval(x + shift) - offset); },
                                map.label() + " (shifted)");
  shifted = shifted.with_fd_scale(map.fd_scale());
  if (map.has_kink_information())
    shifted = shifted.with_kinks([map, shift](const Vector& x) { return map.nondifferentiable_at(x + shift); });
  return shifted;
}

}  // namespace fninv
