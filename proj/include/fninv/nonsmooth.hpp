#pragma once

// Sampling surrogates for Clarke's non-smooth calculus. None of these can
// compute a limsup exactly; they return deterministic finite-sample estimates
// for a given seed.

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

namespace fninv {

using ScalarFunctional = std::function<double(const Vector&)>;
/// Gradient at a point, or nullopt where the functional is not differentiable.
using GradientOracle = std::function<std::optional<Vector>(const Vector&)>;

struct DirDerivativeOptions {
  std::vector<double> radii{1e-2, 1e-3, 1e-4};
  std::size_t samples_per_radius = 64;
  std::uint64_t seed = 0;
};

/// Finite-sample estimate of h0(u; z) = limsup (h(w + t z) - h(w)) / t.
///
/// For each radius r, w is uniform in B(u, r) and the step t |z| is uniform in
/// (0, r]. Draws do not depend on z, so scaling z by lambda scales the result
/// by lambda.
inline double gen_dir_derivative(const ScalarFunctional& h, const Vector& u, const Vector& z,
                                 const DirDerivativeOptions& opt = {}) {
  const double zn = z.norm();
  if (zn == 0.0) throw PreconditionViolation("gen_dir_derivative: direction must be nonzero");
  if (opt.radii.empty() || opt.samples_per_radius == 0)
    throw PreconditionViolation("gen_dir_derivative: empty sampling schedule");
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < opt.radii.size(); ++i) {
    const double r = opt.radii[i];
    Rng rng(opt.seed, i);
    for (std::size_t s = 0; s < opt.samples_per_radius; ++s) {
      const Vector w = rng.in_ball(u, r);
      const double t = r * (1.0 - rng.uniform()) / zn;
      const double q = (h(w + t * z) - h(w)) / t;
      best = std::max(best, q);
    }
  }
  return best;
}

/// Result of the minimum-norm-point problem over a finite point set.
struct MinNormPoint {
  Vector point;
  /// Convex multipliers, one per input point; nonnegative and summing to 1.
  std::vector<double> weights;
  std::size_t iterations = 0;
};

/// Minimum-norm element of conv{points} by Wolfe's algorithm.
inline MinNormPoint min_norm_in_hull(const std::vector<Vector>& points, double tol = 1e-10) {
  if (points.empty()) throw PreconditionViolation("min_norm_in_hull: empty point set");
  const std::size_t m = points.size();
  const auto dim = points.front().size();

  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, p.squaredNorm());

  std::size_t start = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (points[i].squaredNorm() < points[start].squaredNorm()) start = i;

  std::vector<std::size_t> active{start};
  std::vector<double> lambda{1.0};
  Vector x = points[start];

  auto combine = [&](const std::vector<double>& w) {
    Vector v = Vector::Zero(dim);
    for (std::size_t k = 0; k < active.size(); ++k) v += w[k] * points[active[k]];
    return v;
  };

  // Minimizer of |sum mu_k p_k| over the affine hull of the active set.
  auto affine_minimizer = [&]() {
    const std::size_t k = active.size();
    std::vector<double> mu(k, 0.0);
    if (k == 1) {
      mu[0] = 1.0;
      return mu;
    }
    const Vector& p0 = points[active[0]];
    Matrix b(dim, static_cast<Eigen::Index>(k - 1));
    for (std::size_t i = 1; i < k; ++i) b.col(static_cast<Eigen::Index>(i - 1)) = points[active[i]] - p0;
    const Vector c = b.completeOrthogonalDecomposition().solve(-p0);
    double rest = 1.0;
    for (std::size_t i = 1; i < k; ++i) {
      mu[i] = c[static_cast<Eigen::Index>(i - 1)];
      rest -= mu[i];
    }
    mu[0] = rest;
    return mu;
  };

  std::size_t iter = 0;
  const std::size_t max_iter = 50 * (m + 10);
  while (iter++ < max_iter) {
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x.dot(points[i]);
      if (d < best) {
        best = d;
        j = i;
      }
    }
    if (best >= x.squaredNorm() - tol * std::max(scale, 1e-300)) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    while (iter++ < max_iter) {
      const std::vector<double> mu = affine_minimizer();
      bool interior = true;
      for (double v : mu)
        if (v <= 1e-14) interior = false;
      if (interior) {
        lambda = mu;
        break;
      }
      double theta = 1.0;
      for (std::size_t k = 0; k < mu.size(); ++k)
        if (mu[k] <= 1e-14 && lambda[k] - mu[k] > 0.0) theta = std::min(theta, lambda[k] / (lambda[k] - mu[k]));
      for (std::size_t k = 0; k < mu.size(); ++k) lambda[k] = (1.0 - theta) * lambda[k] + theta * mu[k];
      std::vector<std::size_t> keep_idx;
      std::vector<double> keep_w;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (lambda[k] > 1e-14) {
          keep_idx.push_back(active[k]);
          keep_w.push_back(lambda[k]);
        }
      }
      if (keep_idx.empty()) {
        keep_idx.push_back(active.back());
        keep_w.push_back(1.0);
      }
      active = std::move(keep_idx);
      lambda = std::move(keep_w);
    }
    double total = 0.0;
    for (double v : lambda) total += v;
    for (double& v : lambda) v /= total;
    x = combine(lambda);
  }

  MinNormPoint out;
  out.point = x;
  out.weights.assign(m, 0.0);
  for (std::size_t k = 0; k < active.size(); ++k) out.weights[active[k]] += lambda[k];
  out.iterations = iter;
  return out;
}

/// Gradients sampled near u and the minimum-norm element of their hull.
struct SubdiffSample {
  Vector center;
  std::vector<Vector> gradients;
  double radius = 0.0;
  Vector min_norm_element;
  std::vector<double> weights;
  double min_norm = 0.0;
};

struct SubdiffOptions {
  double radius = 1e-6;
  std::size_t count = 32;
  std::uint64_t seed = 0;
  /// Allowed rejected (nondifferentiable) samples per accepted one.
  std::size_t max_retries_per_sample = 8;
};

/// Gradient-sampling approximation of the Clarke subdifferential at u.
inline SubdiffSample clarke_subdiff_sample(const GradientOracle& grad, const Vector& u,
                                           const SubdiffOptions& opt = {}) {
  if (opt.count == 0 || !(opt.radius > 0.0))
    throw PreconditionViolation("clarke_subdiff_sample: need count >= 1 and radius > 0");
  SubdiffSample s;
  s.center = u;
  s.radius = opt.radius;
  Rng rng(opt.seed, 0x5d);
  std::size_t rejected = 0;
  const std::size_t budget = opt.max_retries_per_sample * opt.count;
  while (s.gradients.size() < opt.count) {
    const Vector w = rng.in_ball(u, opt.radius);
    auto g = grad(w);
    if (!g || !g->allFinite()) {
      if (++rejected > budget)
        throw SamplingFailed("clarke_subdiff_sample: too many nondifferentiable samples near the center");
      continue;
    }
    s.gradients.push_back(std::move(*g));
  }
  const MinNormPoint mn = min_norm_in_hull(s.gradients);
  s.min_norm_element = mn.point;
  s.weights = mn.weights;
  s.min_norm = mn.point.norm();
  return s;
}

/// Gradient oracle for a merit function; rejects points where the map or
/// the gauge reports a kink.
inline GradientOracle merit_gradient_oracle(const MeritFunction& m) {
  return [m](const Vector& x) -> std::optional<Vector> {
    if (!m.smooth_at(x)) return std::nullopt;
    return m.gradient(x);
  };
}

/// Distance of 0 from the (sampled) subdifferential: |grad phi(u)| where phi
/// is differentiable at u, else the min-norm of a gradient sample.
inline double stationarity_residual(const MeritFunction& m, const Vector& u,
                                    const SubdiffOptions& opt = {}) {
  if (m.smooth_at(u)) return m.gradient(u).norm();
  return clarke_subdiff_sample(merit_gradient_oracle(m), u, opt).min_norm;
}

enum class StrictnessVerdict { Consistent, Violated };

inline const char* to_string(StrictnessVerdict v) {
  return v == StrictnessVerdict::Consistent ? "consistent" : "violated";
}

struct StrictnessReport {
  Vector center;
  std::vector<Vector> directions;
  std::vector<double> radii;
  /// Worst deviation observed at each radius.
  std::vector<double> deviation_by_radius;
  double worst_deviation = 0.0;
  double tolerance = 0.0;
  StrictnessVerdict verdict = StrictnessVerdict::Consistent;
};

struct StrictnessOptions {
  std::size_t direction_count = 8;
  std::vector<double> radii{1e-1, 1e-2, 1e-3};
  std::size_t samples_per_radius = 256;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

/// Tests whether (f(w + t z) - f(w)) / t -> f'(u) z uniformly as w -> u,
/// t -> 0+ over sampled unit directions z.
///
/// Steps are log-uniform in [r * min(r, 0.1), r] so that quotients are seen
/// at scales well below |w - u|, where non-uniform convergence shows up.
/// Verdict is Violated when the deviation at the smallest radius exceeds the
/// tolerance and more than half the deviation at the largest radius.
inline StrictnessReport strictness_check(const VectorMap& map, const Vector& u,
                                         const StrictnessOptions& opt = {}) {
  if (opt.radii.size() < 2) throw PreconditionViolation("strictness_check: need at least two radii");
  if (opt.direction_count == 0) throw PreconditionViolation("strictness_check: need directions");
  StrictnessReport rep;
  rep.center = u;
  rep.radii = opt.radii;
  rep.tolerance = opt.tolerance;

  const Matrix jac = map.jacobian(u).entries;
  Rng dir_rng(opt.seed, 0xd1);
  const auto n = static_cast<std::size_t>(u.size());
  for (std::size_t k = 0; k < opt.direction_count; ++k) {
    Vector z = dir_rng.on_sphere(Vector::Zero(static_cast<Eigen::Index>(n)), 1.0);
    rep.directions.push_back(std::move(z));
  }

  for (std::size_t i = 0; i < opt.radii.size(); ++i) {
    const double r = opt.radii[i];
    const double lo = r * std::min(r, 0.1);
    Rng rng(opt.seed, i);
    double worst = 0.0;
    for (std::size_t s = 0; s < opt.samples_per_radius; ++s) {
      const Vector w = rng.in_ball(u, r);
      const double t = lo * std::pow(r / lo, rng.uniform());
      const Vector fw = map.eval(w);
      for (const auto& z : rep.directions) {
        const Vector q = (map.eval(w + t * z) - fw) / t;
        worst = std::max(worst, (q - jac * z).norm());
      }
    }
    rep.deviation_by_radius.push_back(worst);
    rep.worst_deviation = std::max(rep.worst_deviation, worst);
  }

  const double smallest = rep.deviation_by_radius.back();
  const double largest = rep.deviation_by_radius.front();
  rep.verdict = (smallest > opt.tolerance && smallest > 0.5 * largest) ? StrictnessVerdict::Violated
                                                                       : StrictnessVerdict::Consistent;
  return rep;
}

}  // namespace fninv
