#pragma once

// Evidence-gathering checks for the hypotheses behind global invertibility.
// Sampling can falsify a hypothesis or support it; it never proves
// one, and the verdict names reflect that.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fninv/errors.hpp"
#include "fninv/map_model.hpp"
#include "fninv/merit.hpp"
#include "fninv/mountain_pass.hpp"
#include "fninv/sampling.hpp"
#include "fninv/solve.hpp"

namespace fninv {

// ---------------------------------------------------------------------------
// Coercivity

enum class CoercivityTrend { Diverging, Bounded, Inconclusive };

inline const char* to_string(CoercivityTrend t) {
  switch (t) {
    case CoercivityTrend::Diverging: return "diverging";
    case CoercivityTrend::Bounded: return "bounded";
    case CoercivityTrend::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct SphereMinEntry {
  double radius = 0.0;
  double min_value = 0.0;
  Vector argmin;
};

struct CoercivityReport {
  std::vector<double> radii;
  std::vector<SphereMinEntry> sphere_mins;
  CoercivityTrend trend = CoercivityTrend::Inconclusive;
  double threshold = 0.0;
  double tolerance = 0.0;
};

struct CoercivityOptions {
  std::vector<double> radii{1, 2, 4, 8, 16};
  std::size_t samples_per_sphere = 1024;
  std::size_t polish_iters = 200;
  std::uint64_t seed = 0;
  /// Divergence threshold; unset means 10 * phi(0) + 1.
  std::optional<double> threshold{};
  /// Slack for the "bounded" comparison of the last and first minima.
  double tolerance = 1e-6;
};

/// Minimum of phi over sampled-and-polished spheres |x| = R.
///
/// Trend: diverging when the minima strictly increase over the top half of
/// the schedule and the last one exceeds the threshold; bounded when the
/// last minimum does not exceed the first (plus tolerance); otherwise
/// inconclusive.
inline CoercivityReport coercivity_probe(const VectorMap& map, const Vector& y, const Gauge& gauge,
                                         const CoercivityOptions& opt = {}) {
  if (opt.radii.size() < 2) throw PreconditionViolation("coercivity_probe: need at least two radii");
  for (std::size_t k = 0; k < opt.radii.size(); ++k) {
    if (!(opt.radii[k] > 0.0) || (k > 0 && !(opt.radii[k] > opt.radii[k - 1])))
      throw PreconditionViolation("coercivity_probe: radii must be positive and strictly increasing");
  }
  const MeritFunction phi(map, y, gauge);
  CoercivityReport rep;
  rep.radii = opt.radii;
  rep.tolerance = opt.tolerance;
  rep.threshold = opt.threshold.value_or(10.0 * phi.value(Vector::Zero(y.size())) + 1.0);

  for (std::size_t k = 0; k < opt.radii.size(); ++k) {
    SphereOptions so;
    so.samples = opt.samples_per_sphere;
    so.polish_iters = opt.polish_iters;
    so.seed = mix_seed(opt.seed, k);
    const SphereMin sm = sphere_min(phi, opt.radii[k], so);
    rep.sphere_mins.push_back({opt.radii[k], sm.value, sm.point});
  }

  const auto& m = rep.sphere_mins;
  const std::size_t half = m.size() / 2;
  bool increasing = true;
  for (std::size_t k = half + 1; k < m.size(); ++k)
    if (!(m[k].min_value > m[k - 1].min_value)) increasing = false;
  if (increasing && m.back().min_value > rep.threshold) {
    rep.trend = CoercivityTrend::Diverging;
  } else if (m.back().min_value <= m.front().min_value + opt.tolerance) {
    rep.trend = CoercivityTrend::Bounded;
  } else {
    rep.trend = CoercivityTrend::Inconclusive;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Jacobian regularity

enum class RegularityVerdict { NoSingularityFound, NearSingularPointFound };

inline const char* to_string(RegularityVerdict v) {
  return v == RegularityVerdict::NoSingularityFound ? "no_singularity_found" : "near_singular_point_found";
}

struct Box {
  Vector lo;
  Vector hi;

  static Box cube(std::size_t n, double lo, double hi) {
    return {Vector::Constant(static_cast<Eigen::Index>(n), lo), Vector::Constant(static_cast<Eigen::Index>(n), hi)};
  }
  bool contains(const Vector& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Vector clamp(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

struct LocatedValue {
  double value = std::numeric_limits<double>::infinity();
  Vector location;
};

struct RegularityReport {
  Box region;
  std::size_t samples = 0;
  std::size_t refinement_depth = 0;
  LocatedValue min_abs_det;
  LocatedValue min_sigma;
  /// Largest singular value at min_sigma.location (the local Jacobian scale).
  double sigma_max_at_min = 0.0;
  /// min_sigma after the initial sweep and after each refinement stage.
  std::vector<double> min_sigma_by_stage;
  RegularityVerdict verdict = RegularityVerdict::NoSingularityFound;
};

struct RegularityOptions {
  /// Sample points per stage.
  std::size_t budget = 1024;
  std::size_t refinement_depth = 4;
  /// Compass-search evaluations spent per refinement stage.
  std::size_t polish_evals = 400;
  double relative_threshold = 1e-6;
  std::uint64_t seed = 0;
};

/// Low-discrepancy sweep of the region tracking min |det f'| and min sigma_min,
/// followed by `refinement_depth` stages around the current sigma minimizer,
/// each in a box half the previous size plus a short compass search.
inline RegularityReport jacobian_regularity_probe(const VectorMap& map, const Box& region,
                                                  const RegularityOptions& opt = {}) {
  const std::size_t n = map.dimension();
  if (static_cast<std::size_t>(region.lo.size()) != n || static_cast<std::size_t>(region.hi.size()) != n)
    throw DimensionMismatch(n, static_cast<std::size_t>(region.lo.size()), "jacobian_regularity_probe region");
  if (!(region.hi.array() >= region.lo.array()).all())
    throw PreconditionViolation("jacobian_regularity_probe: empty region");
  if (opt.budget < 1) throw PreconditionViolation("jacobian_regularity_probe: budget must be >= 1");

  RegularityReport rep;
  rep.region = region;
  rep.refinement_depth = opt.refinement_depth;

  auto consider = [&](const Vector& x) {
    const JacobianMatrix j = map.jacobian(x);
    ++rep.samples;
    const double d = std::abs(det(j));
    const double s = min_singular_value(j);
    if (d < rep.min_abs_det.value) rep.min_abs_det = {d, x};
    if (s < rep.min_sigma.value) rep.min_sigma = {s, x};
    return s;
  };

  const ScrambledHalton seq(n, opt.seed);
  for (std::size_t k = 0; k < opt.budget; ++k) consider(seq.box_point(k, region.lo, region.hi));
  rep.min_sigma_by_stage.push_back(rep.min_sigma.value);

  Vector half = 0.5 * (region.hi - region.lo);
  for (std::size_t stage = 1; stage <= opt.refinement_depth; ++stage) {
    half *= 0.5;
    const Vector c = rep.min_sigma.location;
    const Box box{region.clamp(c - half), region.clamp(c + half)};
    const ScrambledHalton local(n, mix_seed(opt.seed, stage));
    for (std::size_t k = 0; k < opt.budget; ++k) consider(local.box_point(k, box.lo, box.hi));

    // Compass search on sigma_min from the best point, kept inside the region.
    Vector x = rep.min_sigma.location;
    double fx = rep.min_sigma.value;
    double step = 0.25 * half.maxCoeff();
    std::size_t evals = 0;
    while (evals < opt.polish_evals && step > 1e-14 * (1.0 + x.norm())) {
      bool improved = false;
      for (std::size_t i = 0; i < n && !improved; ++i) {
        for (double sgn : {1.0, -1.0}) {
          Vector t = x;
          t[static_cast<Eigen::Index>(i)] += sgn * step;
          t = region.clamp(t);
          const double ft = consider(t);
          ++evals;
          if (ft < fx) {
            x = t;
            fx = ft;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    rep.min_sigma_by_stage.push_back(rep.min_sigma.value);
  }

  rep.sigma_max_at_min = max_singular_value(map.jacobian(rep.min_sigma.location));
  rep.verdict = rep.min_sigma.value <= opt.relative_threshold * (1.0 + rep.sigma_max_at_min)
                    ? RegularityVerdict::NearSingularPointFound
                    : RegularityVerdict::NoSingularityFound;
  return rep;
}

// ---------------------------------------------------------------------------
// Gauge conditions

struct GaugeReport {
  std::size_t dimension = 0;
  std::size_t samples = 0;
  double eta_at_zero = 0.0;
  double grad_norm_at_zero = 0.0;
  /// Nonzero points with eta <= 0 or a vanishing gradient (capped).
  std::vector<Vector> positivity_violations;
  GaugeBound bound;
  /// min over samples of eta(x) / (c |x|^alpha); the bound holds iff >= 1.
  double worst_ratio = std::numeric_limits<double>::infinity();
  Vector worst_point;
  /// Samples with ratio < 1 (capped).
  std::vector<Vector> bound_violations;
  bool c1_holds = false;
  bool c4_holds = false;
};

struct GaugeCheckOptions {
  std::size_t dimension = 2;
  std::size_t samples = 4096;
  std::size_t violation_cap = 16;
  std::uint64_t seed = 0;
};

/// Checks eta(0) = 0, eta'(0) = 0 exactly, and samples the ball |x| <= M for
/// positivity, a nonvanishing gradient, and eta(x) >= c |x|^alpha.
///
/// Half the samples are uniform in the ball; the rest sit on spheres with
/// radii log-spaced down to 1e-6 M, where power bounds are most fragile.
inline GaugeReport check_gauge_conditions(const Gauge& gauge, const GaugeBound& bound,
                                          const GaugeCheckOptions& opt = {}) {
  if (!(bound.c > 0.0) || !(bound.alpha > 0.0) || !(bound.bigm > 0.0))
    throw PreconditionViolation("check_gauge_conditions: c, alpha and M must be positive");
  if (opt.dimension == 0 || opt.samples == 0)
    throw PreconditionViolation("check_gauge_conditions: need a dimension and samples");
  GaugeReport rep;
  rep.dimension = opt.dimension;
  rep.bound = bound;
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(opt.dimension));
  rep.eta_at_zero = gauge.value(zero);
  rep.grad_norm_at_zero = gauge.gradient(zero).norm();

  Rng rng(opt.seed, 0x9a);
  for (std::size_t s = 0; s < opt.samples; ++s) {
    Vector x;
    if (s % 2 == 0) {
      x = rng.in_ball(zero, bound.bigm);
    } else {
      const double r = bound.bigm * std::pow(1e-6, rng.uniform());
      x = rng.on_sphere(zero, r);
    }
    const double nx = x.norm();
    if (nx == 0.0) continue;
    ++rep.samples;
    const double eta = gauge.value(x);
    const double gn = gauge.gradient(x).norm();
    if ((eta <= 0.0 || gn == 0.0) && rep.positivity_violations.size() < opt.violation_cap)
      rep.positivity_violations.push_back(x);
    const double ratio = eta / (bound.c * std::pow(nx, bound.alpha));
    if (ratio < rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_point = x;
    }
    if (ratio < 1.0 - 1e-12 && rep.bound_violations.size() < opt.violation_cap) rep.bound_violations.push_back(x);
  }
  rep.c1_holds = rep.eta_at_zero == 0.0 && rep.grad_norm_at_zero == 0.0 && rep.positivity_violations.empty();
  rep.c4_holds = rep.bound_violations.empty();
  return rep;
}

// ---------------------------------------------------------------------------
// Combined report

enum class DiffeoVerdict { ConsistentWithGlobalDiffeo, CounterexampleEvidence };

inline const char* to_string(DiffeoVerdict v) {
  return v == DiffeoVerdict::ConsistentWithGlobalDiffeo ? "consistent_with_global_diffeo"
                                                        : "counterexample_evidence";
}

struct TargetOutcome {
  Vector target;
  CoercivityReport coercivity;
  InversionResult inversion;
};

struct DiffeoReport {
  RegularityReport regularity;
  /// Coercivity at y = 0 (the hypothesis quantifies over every y).
  std::optional<CoercivityReport> origin_coercivity;
  std::vector<TargetOutcome> targets;
  std::optional<PreimagePair> pair;
  std::optional<MountainPassResult> diagnosis;
  DiffeoVerdict verdict = DiffeoVerdict::ConsistentWithGlobalDiffeo;
  /// Subset of {singular_jacobian, non_coercive, non_surjective, non_injective}.
  std::vector<std::string> evidence;
};

struct ReportConfig {
  SolverConfig solver{};
  /// Regularity region [-half_width, half_width]^n; unset uses solver.start_box.
  std::optional<double> region_half_width{};
  RegularityOptions regularity{};
  CoercivityOptions coercivity{};
  bool probe_origin = true;
  DeformationConfig deformation{};
  PairOptions pairs{};
};

/// Runs every probe, the solver and (when a preimage pair turns up) the
/// mountain-pass diagnosis, and folds the outcomes into one verdict.
inline DiffeoReport global_diffeo_report(const VectorMap& map, const Gauge& gauge, const std::vector<Vector>& targets,
                                         const ReportConfig& cfg = {}) {
  const std::size_t n = map.dimension();
  DiffeoReport rep;
  const double hw = cfg.region_half_width.value_or(cfg.solver.start_box);
  const Box region = Box::cube(n, -hw, hw);
  rep.regularity = jacobian_regularity_probe(map, region, cfg.regularity);

  auto add = [&](const std::string& kind) {
    if (std::find(rep.evidence.begin(), rep.evidence.end(), kind) == rep.evidence.end()) rep.evidence.push_back(kind);
  };
  if (rep.regularity.verdict == RegularityVerdict::NearSingularPointFound) add("singular_jacobian");

  if (cfg.probe_origin) {
    rep.origin_coercivity = coercivity_probe(map, Vector::Zero(static_cast<Eigen::Index>(n)), gauge, cfg.coercivity);
    if (rep.origin_coercivity->trend == CoercivityTrend::Bounded) add("non_coercive");
  }

  for (const auto& y : targets) {
    TargetOutcome t;
    t.target = y;
    t.coercivity = coercivity_probe(map, y, gauge, cfg.coercivity);
    t.inversion = invert_at(map, y, gauge, cfg.solver);
    if (t.coercivity.trend == CoercivityTrend::Bounded) add("non_coercive");
    if (t.inversion.status != SolveStatus::Solved) add("non_surjective");
    rep.targets.push_back(std::move(t));
  }

  for (const auto& y : targets) {
    auto pair = find_preimage_pair(map, y, gauge, cfg.solver, cfg.pairs);
    if (!pair) continue;
    rep.pair = pair;
    rep.diagnosis = diagnose_noninjectivity(map, *pair, gauge, cfg.deformation);
    add("non_injective");
    // A pass point outside the probed region is where the path escaped
    // towards infinity; that is loss of coercivity, not a singular point.
    if (rep.diagnosis->classification == PassClassification::SingularJacobianPoint)
      add(region.contains(rep.diagnosis->location) ? "singular_jacobian" : "non_coercive");
    break;
  }

  rep.verdict = rep.evidence.empty() ? DiffeoVerdict::ConsistentWithGlobalDiffeo
                                     : DiffeoVerdict::CounterexampleEvidence;
  return rep;
}

}  // namespace fninv
