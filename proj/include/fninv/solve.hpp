#pragma once

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
#include "fninv/sampling.hpp"

namespace fninv {

struct DampingSchedule {
  double initial = 1e-6;
  double grow = 10.0;
  double shrink = 0.1;
  /// Give up on a start once lambda exceeds this.
  double ceiling = 1e16;
};

struct ArmijoRule {
  double slope = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 40;
};

struct SolverConfig {
  std::size_t starts = 16;
  /// Start points are drawn from [-start_box, start_box]^n.
  double start_box = 3.0;
  double tol_residual = 1e-10;
  double tol_gradient = 1e-10;
  std::size_t max_iters = 200;
  DampingSchedule damping{};
  ArmijoRule armijo{};
  std::uint64_t seed = 0;
  /// Explicit start points; when non-empty they replace the sampled ones.
  std::vector<Vector> initial_points{};

  void validate() const {
    if (starts < 1) throw PreconditionViolation("solver: starts must be >= 1");
    if (!(start_box > 0.0)) throw PreconditionViolation("solver: start box must be positive");
    if (!(tol_residual > 0.0) || !(tol_gradient > 0.0))
      throw PreconditionViolation("solver: tolerances must be positive");
  }
};

enum class SolveStatus { Solved, SingularCriticalPoint, MaxItersExceeded };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::SingularCriticalPoint: return "SingularCriticalPoint";
    case SolveStatus::MaxItersExceeded: return "MaxItersExceeded";
  }
  return "?";
}

inline int rank(SolveStatus s) { return static_cast<int>(s); }

struct InversionResult {
  SolveStatus status = SolveStatus::MaxItersExceeded;
  Vector x;
  double residual_norm = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  double sigma_min_at_x = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t start_index = 0;
  /// Starts aborted by an evaluation error (only meaningful on the best result).
  std::size_t failed_starts = 0;
};

/// Solved < SingularCriticalPoint < MaxItersExceeded, then residual, then start.
inline bool better(const InversionResult& a, const InversionResult& b) {
  if (rank(a.status) != rank(b.status)) return rank(a.status) < rank(b.status);
  if (a.residual_norm != b.residual_norm) return a.residual_norm < b.residual_norm;
  return a.start_index < b.start_index;
}

namespace detail {

/// Counts evaluations made on behalf of one start.
struct StartCounter {
  std::size_t evals = 0;
};

inline InversionResult finish(const MeritFunction& phi, const Vector& x, std::size_t iters,
                              StartCounter& cnt, const SolverConfig& cfg, bool stalled) {
  InversionResult r;
  r.x = x;
  r.iterations = iters;
  const Vector res = phi.residual(x);
  const JacobianMatrix j = phi.map().jacobian(x);
  cnt.evals += 2;
  r.residual_norm = res.norm();
  r.gradient_norm = (j.entries.transpose() * phi.gauge().gradient(res)).norm();
  r.sigma_min_at_x = min_singular_value(j);
  if (r.residual_norm <= cfg.tol_residual) {
    r.status = SolveStatus::Solved;
  } else if (stalled && r.gradient_norm <= cfg.tol_gradient) {
    r.status = SolveStatus::SingularCriticalPoint;
  } else {
    r.status = SolveStatus::MaxItersExceeded;
  }
  r.evaluations = cnt.evals;
  return r;
}

/// Gauss-Newton on the residual, falling back to Levenberg damping whenever
/// the plain step is unavailable or fails to descend. Only decreasing steps
/// are accepted, so phi is monotone along the iterates.
inline InversionResult levenberg_start(const MeritFunction& phi, Vector x, const SolverConfig& cfg) {
  StartCounter cnt;
  const auto n = static_cast<Eigen::Index>(phi.dimension());
  double lambda = cfg.damping.initial;
  Vector r = phi.residual(x);
  ++cnt.evals;
  double cost = 0.5 * r.squaredNorm();
  std::size_t iter = 0;
  bool stalled = false;
  auto try_point = [&](const Vector& trial, Vector& r_trial) {
    if (!trial.allFinite()) return false;
    try {
      r_trial = phi.residual(trial);
      ++cnt.evals;
    } catch (const NonFiniteOutput&) {
      return false;
    } catch (const DomainError&) {
      return false;
    }
    return 0.5 * r_trial.squaredNorm() < cost;
  };
  // Undamped Newton step on the square system; accepted only if it descends.
  auto try_newton = [&](const Matrix& j) {
    const Eigen::FullPivLU<Matrix> lu(j);
    if (!lu.isInvertible()) return false;
    const Vector trial = x + lu.solve(-r);
    Vector r_trial;
    if (!try_point(trial, r_trial)) return false;
    x = trial;
    r = std::move(r_trial);
    cost = 0.5 * r.squaredNorm();
    return true;
  };
  bool polished = false;
  while (iter < cfg.max_iters) {
    if (r.norm() <= cfg.tol_residual) {
      // one extra step to push an accepted root to full precision
      if (polished || r.norm() == 0.0) break;
      polished = true;
      const Matrix j = phi.map().jacobian(x).entries;
      ++cnt.evals;
      if (try_newton(j)) ++iter;
      break;
    }
    const Matrix j = phi.map().jacobian(x).entries;
    ++cnt.evals;
    if (try_newton(j)) {
      lambda = std::max(lambda * cfg.damping.shrink, 1e-300);
      ++iter;
      continue;
    }
    const Vector g = j.transpose() * r;
    const Matrix jtj = j.transpose() * j;
    bool accepted = false;
    while (!accepted) {
      const Matrix a = jtj + lambda * Matrix::Identity(n, n);
      const Vector step = a.ldlt().solve(-g);
      const Vector trial = x + step;
      Vector r_trial;
      if (try_point(trial, r_trial)) {
        x = trial;
        r = std::move(r_trial);
        cost = 0.5 * r.squaredNorm();
        lambda = std::max(lambda * cfg.damping.shrink, 1e-300);
        accepted = true;
        break;
      }
      lambda *= cfg.damping.grow;
      if (lambda > cfg.damping.ceiling || step.norm() <= 1e-16 * (1.0 + x.norm())) {
        stalled = true;
        break;
      }
    }
    if (stalled) break;
    ++iter;
  }
  return finish(phi, x, iter, cnt, cfg, stalled);
}

/// Armijo line search on phi for general gauges. The trial direction is the
/// damped Gauss-Newton direction towards the root; steepest descent is used
/// whenever that direction is not a descent direction of phi.
inline InversionResult armijo_start(const MeritFunction& phi, Vector x, const SolverConfig& cfg) {
  StartCounter cnt;
  const auto n = static_cast<Eigen::Index>(phi.dimension());
  double lambda = cfg.damping.initial;
  Vector r = phi.residual(x);
  ++cnt.evals;
  double val = phi.gauge().value(r);
  std::size_t iter = 0;
  bool stalled = false;
  while (iter < cfg.max_iters) {
    if (r.norm() <= cfg.tol_residual) break;
    const Matrix j = phi.map().jacobian(x).entries;
    ++cnt.evals;
    const Vector grad = j.transpose() * phi.gauge().gradient(r);
    Vector dir = (j.transpose() * j + lambda * Matrix::Identity(n, n)).ldlt().solve(-(j.transpose() * r));
    double slope = grad.dot(dir);
    if (!dir.allFinite() || !(slope < 0.0)) {
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    if (!(slope < 0.0)) {
      stalled = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    for (std::size_t b = 0; b <= cfg.armijo.max_backtracks; ++b, step *= cfg.armijo.backtrack) {
      const Vector trial = x + step * dir;
      Vector r_trial;
      try {
        r_trial = phi.residual(trial);
        ++cnt.evals;
      } catch (const NonFiniteOutput&) {
        continue;
      } catch (const DomainError&) {
        continue;
      }
      const double v = phi.gauge().value(r_trial);
      if (v <= val + cfg.armijo.slope * step * slope && v < val) {
        x = trial;
        r = std::move(r_trial);
        val = v;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      lambda *= cfg.damping.grow;
      if (lambda > cfg.damping.ceiling) {
        stalled = true;
        break;
      }
    } else {
      lambda = std::max(lambda * cfg.damping.shrink, 1e-300);
    }
    ++iter;
  }
  return finish(phi, x, iter, cnt, cfg, stalled);
}

}  // namespace detail

/// Start points: cfg.initial_points if given, else scrambled Halton points in
/// the start box.
inline std::vector<Vector> start_points(std::size_t n, const SolverConfig& cfg) {
  if (!cfg.initial_points.empty()) {
    for (const auto& p : cfg.initial_points)
      if (static_cast<std::size_t>(p.size()) != n)
        throw DimensionMismatch(n, static_cast<std::size_t>(p.size()), "solver start point");
    return cfg.initial_points;
  }
  ScrambledHalton seq(n, cfg.seed);
  const Vector lo = Vector::Constant(static_cast<Eigen::Index>(n), -cfg.start_box);
  const Vector hi = Vector::Constant(static_cast<Eigen::Index>(n), cfg.start_box);
  std::vector<Vector> pts;
  pts.reserve(cfg.starts);
  for (std::size_t k = 0; k < cfg.starts; ++k) pts.push_back(seq.box_point(k, lo, hi));
  return pts;
}

/// One local descent from x0.
inline InversionResult descend_from(const MeritFunction& phi, const Vector& x0, const SolverConfig& cfg) {
  if (phi.gauge().kind() == Gauge::Kind::HalfSqEuclid) return detail::levenberg_start(phi, x0, cfg);
  return detail::armijo_start(phi, x0, cfg);
}

/// Every start's outcome, in start order. Starts whose evaluation throws are
/// omitted; their count is returned through `failed`.
inline std::vector<InversionResult> invert_all_starts(const VectorMap& map, const Vector& y, const Gauge& gauge,
                                                      const SolverConfig& cfg, std::size_t* failed = nullptr) {
  cfg.validate();
  const MeritFunction phi(map, y, gauge);
  const auto starts = start_points(map.dimension(), cfg);
  std::vector<InversionResult> out;
  std::size_t fails = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    try {
      InversionResult r = descend_from(phi, starts[k], cfg);
      r.start_index = k;
      out.push_back(std::move(r));
    } catch (const NonFiniteOutput&) {
      ++fails;
    } catch (const DomainError&) {
      ++fails;
    }
  }
  if (failed) *failed = fails;
  return out;
}

/// Multistart minimization of phi(x) = eta(f(x) - y); returns the best start.
inline InversionResult invert_at(const VectorMap& map, const Vector& y, const Gauge& gauge,
                                 const SolverConfig& cfg) {
  std::size_t failed = 0;
  const auto all = invert_all_starts(map, y, gauge, cfg, &failed);
  InversionResult best;
  best.x = Vector::Zero(static_cast<Eigen::Index>(map.dimension()));
  bool have = false;
  for (const auto& r : all) {
    if (!have || better(r, best)) {
      best = r;
      have = true;
    }
  }
  best.failed_starts = failed;
  return best;
}

struct PreimagePair {
  Vector x1;
  Vector x2;
  Vector value;
  double separation = 0.0;
};

/// Which pair of distinct solution clusters find_preimage_pair reports.
enum class PairSelection { Nearest, Farthest };

struct PairOptions {
  /// Absolute cluster radius; when unset, 1e-6 * (1 + |x|).
  std::optional<double> cluster_radius{};
  PairSelection selection = PairSelection::Nearest;
};

/// Clusters the Solved starts and returns two representatives of distinct
/// clusters, or nullopt when all solutions coincide.
inline std::optional<PreimagePair> find_preimage_pair(const VectorMap& map, const Vector& y, const Gauge& gauge,
                                                      const SolverConfig& cfg, const PairOptions& opt = {}) {
  const auto all = invert_all_starts(map, y, gauge, cfg);
  std::vector<Vector> reps;
  for (const auto& r : all) {
    if (r.status != SolveStatus::Solved) continue;
    bool fresh = true;
    for (const auto& c : reps) {
      const double radius = opt.cluster_radius.value_or(1e-6 * (1.0 + std::max(c.norm(), r.x.norm())));
      if ((c - r.x).norm() <= radius) {
        fresh = false;
        break;
      }
    }
    if (fresh) reps.push_back(r.x);
  }
  if (reps.size() < 2) return std::nullopt;

  std::size_t bi = 0;
  std::size_t bj = 1;
  double best = (reps[0] - reps[1]).norm();
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      const double d = (reps[i] - reps[j]).norm();
      const bool take = opt.selection == PairSelection::Nearest ? d < best : d > best;
      if (take) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  PreimagePair p;
  p.x1 = reps[bi];
  p.x2 = reps[bj];
  p.value = y;
  p.separation = best;
  return p;
}

}  // namespace fninv
