#pragma once

// Discrete minimax search between two zeros of a merit functional.
//
// A polyline from u1 to u2 is relaxed by gradient steps concentrated around
// its highest vertex and re-spaced to equal arclength after every step (a
// string-method style deformation). The highest point of the relaxed path
// approximates a mountain-pass critical point, which is then classified as a
// further zero of the merit or as a point where the Jacobian degenerates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fninv/errors.hpp"
#include "fninv/map_model.hpp"
#include "fninv/merit.hpp"
#include "fninv/sampling.hpp"
#include "fninv/solve.hpp"

namespace fninv {

struct SphereOptions {
  std::size_t samples = 2048;
  std::size_t polish_iters = 200;
  std::uint64_t seed = 0;
};

struct SphereMin {
  Vector point;
  double value = 0.0;
};

/// Value plus gradient pair used by the sphere search.
struct ScalarFunctionalWithGradient {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

inline ScalarFunctionalWithGradient as_functional(const MeritFunction& m) {
  return {[m](const Vector& x) { return m.value(x); }, [m](const Vector& x) { return m.gradient(x); }};
}

/// Minimum of a functional over the sphere |x - center| = radius: best of
/// `samples` uniform points, then projected descent along the sphere.
inline SphereMin sphere_min(const ScalarFunctionalWithGradient& fn, const Vector& center, double radius,
                            const SphereOptions& opt = {}) {
  if (!(radius > 0.0)) throw PreconditionViolation("sphere_min: radius must be positive");
  if (opt.samples == 0) throw PreconditionViolation("sphere_min: need at least one sample");
  Rng rng(opt.seed, 0x5e);
  SphereMin best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < opt.samples; ++s) {
    Vector p = rng.on_sphere(center, radius);
    double v;
    try {
      v = fn.value(p);
    } catch (const NonFiniteOutput&) {
      continue;
    } catch (const DomainError&) {
      continue;
    }
    if (v < best.value) {
      best.value = v;
      best.point = std::move(p);
    }
  }
  if (!std::isfinite(best.value)) throw SamplingFailed("sphere_min: no finite sample on the sphere");

  auto project = [&](const Vector& x) {
    const Vector d = x - center;
    return Vector(center + (radius / d.norm()) * d);
  };

  double step = 0.1 * radius;
  for (std::size_t it = 0; it < opt.polish_iters; ++it) {
    const Vector d = (best.point - center) / radius;
    Vector g = fn.gradient(best.point);
    g -= g.dot(d) * d;
    const double gn = g.norm();
    if (!(gn > 0.0) || !std::isfinite(gn)) break;
    const Vector trial = project(best.point - (step / gn) * g);
    double v = std::numeric_limits<double>::infinity();
    try {
      v = fn.value(trial);
    } catch (const NonFiniteOutput&) {
    } catch (const DomainError&) {
    }
    if (v < best.value) {
      best.value = v;
      best.point = trial;
      step = std::min(step * 1.5, radius);
    } else {
      step *= 0.5;
      if (step < 1e-15 * radius) break;
    }
  }
  return best;
}

inline SphereMin sphere_min(const MeritFunction& psi, double radius, const SphereOptions& opt = {}) {
  return sphere_min(as_functional(psi), Vector::Zero(static_cast<Eigen::Index>(psi.dimension())), radius, opt);
}

/// A discretized path gamma(s_0..s_N) with fixed endpoints.
struct PathState {
  std::vector<Vector> vertices;
  std::size_t max_index = 0;
  double max_value = 0.0;
  std::size_t iteration = 0;
};

enum class PassClassification { ThirdPreimage, SingularJacobianPoint, Unresolved };

inline const char* to_string(PassClassification c) {
  switch (c) {
    case PassClassification::ThirdPreimage: return "ThirdPreimage";
    case PassClassification::SingularJacobianPoint: return "SingularJacobianPoint";
    case PassClassification::Unresolved: return "Unresolved";
  }
  return "?";
}

struct SphereGeometry {
  double rho = 0.0;
  double sphere_min_value = 0.0;
  Vector sphere_min_point;
  /// Sampling plus polish: evidence that the sphere infimum is positive, not proof.
  bool certified_by_sampling = false;
};

struct MountainPassResult {
  /// Critical point estimate in the coordinates of the searched functional.
  Vector v;
  /// v mapped back to the original map's coordinates (v + x2 after a shift).
  Vector location;
  double level = 0.0;
  double gradient_norm = 0.0;
  double residual_norm = 0.0;
  double sigma_min = 0.0;
  PassClassification classification = PassClassification::Unresolved;
  std::optional<SphereGeometry> geometry;
  PathState path;
  /// max(psi(u1), psi(u2)).
  double lower_bound = 0.0;
  /// Path maximum after every accepted deformation step, starting with the
  /// straight segment.
  std::vector<double> max_value_trace;
  bool converged = false;
  std::string stop_reason;
};

struct DeformationConfig {
  std::size_t segments = 64;
  std::size_t max_iters = 4000;
  /// Bump half-width in vertices; 0 selects segments / 8.
  std::size_t bump_halfwidth = 0;
  double tol_gradient = 1e-9;
  double tol_stall = 1e-13;
  std::size_t stall_window = 200;
  double tol_sigma = 1e-3;
  /// A point v with |g(v)| below this counts as a zero of the shifted map.
  double tol_residual = 1e-8;
  /// Third preimages closer than this to an endpoint are not distinct.
  double cluster_radius = 1e-6;
  /// Rejects deformations making the path longer than this multiple of |u2 - u1|.
  double max_length_factor = 4.0;
  /// Enforce psi(u1), psi(u2) <= endpoint_tol (mountain geometry needs both
  /// endpoints at the bottom).
  bool require_zero_endpoints = true;
  double endpoint_tol = 1e-12;
  SphereOptions sphere{};
  std::uint64_t seed = 0;
};

namespace detail {

inline double path_length(const std::vector<Vector>& v) {
  double L = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) L += (v[k] - v[k - 1]).norm();
  return L;
}

/// Redistributes vertices to equal arclength; endpoints are copied unchanged.
inline std::vector<Vector> reparametrize(const std::vector<Vector>& v) {
  const std::size_t n = v.size() - 1;
  std::vector<double> cum(v.size(), 0.0);
  for (std::size_t k = 1; k < v.size(); ++k) cum[k] = cum[k - 1] + (v[k] - v[k - 1]).norm();
  const double total = cum.back();
  std::vector<Vector> out(v.size());
  out.front() = v.front();
  out.back() = v.back();
  if (total == 0.0) {
    for (std::size_t k = 1; k < n; ++k) out[k] = v[k];
    return out;
  }
  std::size_t seg = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 1 < n && cum[seg + 1] < target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double a = len > 0.0 ? (target - cum[seg]) / len : 0.0;
    out[k] = v[seg] + std::clamp(a, 0.0, 1.0) * (v[seg + 1] - v[seg]);
  }
  return out;
}

inline void locate_max(PathState& p, const std::vector<double>& values) {
  p.max_index = 0;
  p.max_value = values[0];
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > p.max_value) {
      p.max_value = values[k];
      p.max_index = k;
    }
  }
}

inline std::vector<double> vertex_values(const MeritFunction& psi, const std::vector<Vector>& v) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = psi.value(v[k]);
  return out;
}

/// Golden-section maximization of psi along the polyline between vertices
/// lo and hi (parameter measured in vertex units).
inline std::pair<Vector, double> maximize_along(const MeritFunction& psi, const std::vector<Vector>& v,
                                                std::size_t lo, std::size_t hi) {
  auto point_at = [&](double s) {
    const auto k = std::min(static_cast<std::size_t>(std::floor(s)), v.size() - 2);
    const double a = s - static_cast<double>(k);
    return Vector(v[k] + a * (v[k + 1] - v[k]));
  };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = static_cast<double>(lo);
  double b = static_cast<double>(hi);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = psi.value(point_at(c));
  double fd = psi.value(point_at(d));
  for (int it = 0; it < 80 && (b - a) > 1e-13; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = psi.value(point_at(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = psi.value(point_at(d));
    }
  }
  const double s = fc > fd ? c : d;
  return {point_at(s), std::max(fc, fd)};
}

}  // namespace detail

/// Minimax search for a critical point of psi between u1 and u2.
inline MountainPassResult mountain_pass_search(const MeritFunction& psi, const Vector& u1, const Vector& u2,
                                               const DeformationConfig& cfg = {}) {
  if (u1.size() != u2.size() || static_cast<std::size_t>(u1.size()) != psi.dimension())
    throw DimensionMismatch(psi.dimension(), static_cast<std::size_t>(u1.size()), "mountain_pass_search");
  const double span = (u2 - u1).norm();
  if (!(span > 0.0)) throw PreconditionViolation("mountain_pass_search: endpoints must differ");
  if (cfg.segments < 2) throw PreconditionViolation("mountain_pass_search: need at least 2 segments");

  const double psi1 = psi.value(u1);
  const double psi2 = psi.value(u2);
  if (cfg.require_zero_endpoints && (psi1 > cfg.endpoint_tol || psi2 > cfg.endpoint_tol))
    throw PreconditionViolation("mountain_pass_search: endpoints are not zeros of the functional");

  const std::size_t n_seg = cfg.segments;
  const double halfwidth =
      static_cast<double>(cfg.bump_halfwidth > 0 ? cfg.bump_halfwidth : std::max<std::size_t>(1, n_seg / 8));
  const double max_length = cfg.max_length_factor * span;

  MountainPassResult res;
  res.lower_bound = std::max(psi1, psi2);

  PathState path;
  path.vertices.resize(n_seg + 1);
  for (std::size_t k = 0; k <= n_seg; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n_seg);
    path.vertices[k] = u1 + s * (u2 - u1);
  }
  path.vertices.front() = u1;
  path.vertices.back() = u2;
  std::vector<double> values = detail::vertex_values(psi, path.vertices);
  detail::locate_max(path, values);
  res.max_value_trace.push_back(path.max_value);

  double step = span / static_cast<double>(n_seg);
  std::size_t iter = 0;
  std::string reason = "iteration budget exhausted";
  bool converged = false;
  while (iter < cfg.max_iters) {
    const Vector gmax = psi.gradient(path.vertices[path.max_index]);
    if (gmax.norm() <= cfg.tol_gradient) {
      converged = true;
      reason = "gradient tolerance reached at the path maximum";
      break;
    }
    // Gradients on the bump around the current maximum.
    std::vector<Vector> grads(path.vertices.size());
    std::vector<double> weights(path.vertices.size(), 0.0);
    double gscale = 0.0;
    for (std::size_t k = 1; k < n_seg; ++k) {
      const double dist = std::abs(static_cast<double>(k) - static_cast<double>(path.max_index));
      const double w = std::max(0.0, 1.0 - dist / halfwidth);
      if (w == 0.0) continue;
      weights[k] = w;
      grads[k] = psi.gradient(path.vertices[k]);
      gscale = std::max(gscale, grads[k].norm());
    }
    if (!(gscale > 0.0)) {
      // Only endpoints on the bump (or a flat bump): nothing can move.
      reason = "no movable vertex near the path maximum";
      break;
    }

    bool accepted = false;
    while (step > 1e-14 * span) {
      std::vector<Vector> trial = path.vertices;
      for (std::size_t k = 1; k < n_seg; ++k)
        if (weights[k] > 0.0) trial[k] -= (step * weights[k] / gscale) * grads[k];
      trial = detail::reparametrize(trial);
      if (detail::path_length(trial) > max_length) {
        step *= 0.5;
        continue;
      }
      std::vector<double> tv;
      try {
        tv = detail::vertex_values(psi, trial);
      } catch (const NonFiniteOutput&) {
        step *= 0.5;
        continue;
      } catch (const DomainError&) {
        step *= 0.5;
        continue;
      }
      PathState cand;
      cand.vertices = std::move(trial);
      detail::locate_max(cand, tv);
      if (cand.max_value <= path.max_value) {
        cand.iteration = path.iteration + 1;
        path = std::move(cand);
        values = std::move(tv);
        step = std::min(step * 1.25, 4.0 * span / static_cast<double>(n_seg));
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iter;
    if (!accepted) {
      reason = "step size underflow";
      break;
    }
    res.max_value_trace.push_back(path.max_value);
    const std::size_t m = res.max_value_trace.size();
    if (m > cfg.stall_window) {
      const double before = res.max_value_trace[m - 1 - cfg.stall_window];
      if (before - path.max_value < cfg.tol_stall * (1.0 + std::abs(path.max_value))) {
        reason = "path maximum stalled";
        break;
      }
    }
  }
  res.converged = converged;
  res.stop_reason = reason;

  // Refine the maximum along the final polyline.
  Vector v = path.vertices[path.max_index];
  double level = path.max_value;
  if (!converged) {
    const std::size_t lo = path.max_index == 0 ? 0 : path.max_index - 1;
    const std::size_t hi = std::min(path.max_index + 1, n_seg);
    const auto [p, val] = detail::maximize_along(psi, path.vertices, lo, hi);
    if (val > level) {
      v = p;
      level = val;
    }
  }

  res.v = v;
  res.location = v;
  res.level = level;
  res.path = path;
  const Vector g = psi.residual(v);
  const JacobianMatrix jac = psi.map().jacobian(v);
  res.residual_norm = g.norm();
  res.gradient_norm = (jac.entries.transpose() * psi.gauge().gradient(g)).norm();
  res.sigma_min = min_singular_value(jac);
  const double away = std::min((v - u1).norm(), (v - u2).norm());
  if (res.residual_norm <= cfg.tol_residual && away > cfg.cluster_radius) {
    res.classification = PassClassification::ThirdPreimage;
  } else if (res.sigma_min <= cfg.tol_sigma) {
    res.classification = PassClassification::SingularJacobianPoint;
  } else {
    res.classification = PassClassification::Unresolved;
  }
  return res;
}

/// Injectivity diagnosis from two preimages of the same value: shift so the
/// pair sits at 0 and e = x1 - x2, check the sphere |x| = rho separates them,
/// then run the minimax search and report the critical point in original
/// coordinates.
inline MountainPassResult diagnose_noninjectivity(const VectorMap& map, const PreimagePair& pair, const Gauge& gauge,
                                                  const DeformationConfig& cfg = {}) {
  const Vector e = pair.x1 - pair.x2;
  const VectorMap g = shift_map(map, pair.x2, pair.value);
  const MeritFunction psi(g, Vector::Zero(static_cast<Eigen::Index>(map.dimension())), gauge);
  const Vector origin = Vector::Zero(e.size());

  double rho = 0.5 * e.norm();
  if (gauge.bound()) rho = std::min(rho, gauge.bound()->bigm);

  SphereOptions sopt = cfg.sphere;
  sopt.seed = cfg.seed;
  const SphereMin sm = sphere_min(psi, rho, sopt);
  SphereGeometry geo;
  geo.rho = rho;
  geo.sphere_min_value = sm.value;
  geo.sphere_min_point = sm.point;
  const double floor = std::max(psi.value(origin), psi.value(e));
  geo.certified_by_sampling = sm.value > floor;

  if (!geo.certified_by_sampling) {
    MountainPassResult res;
    res.v = origin;
    res.location = pair.x2;
    res.classification = PassClassification::Unresolved;
    res.geometry = geo;
    res.lower_bound = floor;
    res.stop_reason = "sphere minimum does not separate the preimages";
    return res;
  }

  DeformationConfig mp = cfg;
  mp.require_zero_endpoints = false;
  MountainPassResult res = mountain_pass_search(psi, origin, e, mp);
  res.geometry = geo;
  res.location = res.v + pair.x2;
  return res;
}

}  // namespace fninv
