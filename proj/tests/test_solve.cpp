#include <cmath>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "fninv/solve.hpp"

using namespace fninv;
using fninv::testing::vec2;

namespace {

// Newton on x^3 + x = y; the cubic is strictly increasing so the root is unique.
double cubic_root(double y) {
  double x = std::cbrt(y);
  for (int i = 0; i < 100; ++i) {
    const double step = (x * x * x + x - y) / (3 * x * x + 1);
    x -= step;
    if (std::abs(step) < 1e-17 * (1 + std::abs(x))) break;
  }
  return x;
}

void check_fermat(const InversionResult& r, const SolverConfig& cfg) {
  if (r.gradient_norm <= cfg.tol_gradient)
    EXPECT_TRUE(r.residual_norm <= cfg.tol_residual || r.sigma_min_at_x <= 1e-4)
        << "grad " << r.gradient_norm << " res " << r.residual_norm << " sigma " << r.sigma_min_at_x;
}

}  // namespace

TEST(Solve, IdentitySingleStart) {
  SolverConfig cfg;
  cfg.starts = 1;
  const auto r = invert_at(maps::identity(), vec2(3, -1), Gauge::half_sq_euclid(), cfg);
  EXPECT_EQ(r.status, SolveStatus::Solved);
  EXPECT_EQ(r.x, vec2(3, -1));
  EXPECT_EQ(r.residual_norm, 0.0);
  EXPECT_LE(r.iterations, 2u);
}

TEST(Solve, CubicExamples) {
  for (const auto& g : {Gauge::half_sq_euclid(), Gauge::p_power(4)}) {
    const auto r = invert_at(maps::cubic(), vec2(2, 2), g, SolverConfig{});
    EXPECT_EQ(r.status, SolveStatus::Solved) << g.name();
    EXPECT_LE((r.x - vec2(1, 1)).norm(), 1e-10) << g.name();
  }
}

TEST(Solve, CubicMatchesScalarNewton) {
  Rng rng(3, 9);
  SolverConfig cfg;
  for (int k = 0; k < 50; ++k) {
    const Vector y = vec2(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const auto r = invert_at(maps::cubic(), y, Gauge::half_sq_euclid(), cfg);
    ASSERT_EQ(r.status, SolveStatus::Solved);
    EXPECT_LE((maps::cubic().eval(r.x) - y).norm(), 1e-10);
    EXPECT_NEAR(r.x[0], cubic_root(y[0]), 1e-8);
    EXPECT_NEAR(r.x[1], cubic_root(y[1]), 1e-8);
  }
}

TEST(Solve, ComplexSquareFromGivenStart) {
  SolverConfig cfg;
  cfg.starts = 1;
  cfg.initial_points = {vec2(0.1, 0.9)};
  const auto r = invert_at(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  EXPECT_EQ(r.status, SolveStatus::Solved);
  EXPECT_LE(std::min((r.x - vec2(1, 0)).norm(), (r.x - vec2(-1, 0)).norm()), 1e-8);
}

TEST(Solve, SingularCriticalPointAtOrigin) {
  // start exactly at the critical point: the gradient vanishes but f(0) != y
  SolverConfig cfg;
  cfg.starts = 1;
  cfg.initial_points = {vec2(0, 0)};
  const auto r = invert_at(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  EXPECT_EQ(r.status, SolveStatus::SingularCriticalPoint);
  EXPECT_EQ(r.sigma_min_at_x, 0.0);
  check_fermat(r, cfg);
}

TEST(Solve, EveryStartSatisfiesSoundnessAndFermat) {
  SolverConfig cfg;
  cfg.starts = 32;
  for (const auto& f : fninv::testing::corpus()) {
    for (const auto& g : {Gauge::half_sq_euclid(), Gauge::p_power(4)}) {
      for (const Vector& y : {vec2(1, 0), vec2(0, 0), vec2(-2, 3)}) {
        for (const auto& r : invert_all_starts(f, y, g, cfg)) {
          if (r.status == SolveStatus::Solved) EXPECT_LE((f.eval(r.x) - y).norm(), cfg.tol_residual) << f.label();
          check_fermat(r, cfg);
        }
      }
    }
  }
}

TEST(Solve, Deterministic) {
  SolverConfig cfg;
  cfg.seed = 17;
  const auto a = invert_at(maps::complex_exp(), vec2(1, 2), Gauge::half_sq_euclid(), cfg);
  const auto b = invert_at(maps::complex_exp(), vec2(1, 2), Gauge::half_sq_euclid(), cfg);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.evaluations, b.evaluations);
  EXPECT_EQ(a.start_index, b.start_index);
  EXPECT_EQ(start_points(2, cfg), start_points(2, cfg));
}

TEST(Solve, MeritNonincreasingAlongIterations) {
  for (const auto& g : {Gauge::half_sq_euclid(), Gauge::p_power(4)}) {
    const MeritFunction phi(maps::complex_exp(), vec2(1, 2), g);
    double last = phi.value(vec2(2.5, -1.5));
    for (std::size_t k = 1; k <= 30; ++k) {
      SolverConfig cfg;
      cfg.max_iters = k;
      const auto r = descend_from(phi, vec2(2.5, -1.5), cfg);
      const double v = phi.value(r.x);
      EXPECT_LE(v, last) << g.name() << " k=" << k;
      last = v;
    }
  }
}

TEST(Solve, RankingPrefersStatusThenResidual) {
  InversionResult a, b;
  a.status = SolveStatus::Solved;
  a.residual_norm = 1e-11;
  b.status = SolveStatus::SingularCriticalPoint;
  b.residual_norm = 0.0;
  EXPECT_TRUE(better(a, b));
  b.status = SolveStatus::Solved;
  EXPECT_TRUE(better(b, a));
  a.residual_norm = 0.0;
  a.start_index = 1;
  b.start_index = 3;
  EXPECT_TRUE(better(a, b));
}

TEST(Solve, ConfigValidation) {
  SolverConfig cfg;
  cfg.starts = 0;
  EXPECT_THROW(invert_at(maps::cubic(), vec2(0, 0), Gauge::half_sq_euclid(), cfg), PreconditionViolation);
  cfg = SolverConfig{};
  cfg.tol_residual = 0;
  EXPECT_THROW(invert_at(maps::cubic(), vec2(0, 0), Gauge::half_sq_euclid(), cfg), PreconditionViolation);
  EXPECT_THROW(invert_at(maps::cubic(), Vector::Zero(3), Gauge::half_sq_euclid(), SolverConfig{}), DimensionMismatch);
}

TEST(Pairs, ComplexSquare) {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.seed = 7;
  const auto p = find_preimage_pair(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->separation, 2.0, 1e-8);
  EXPECT_NEAR(std::abs(p->x1[0]), 1.0, 1e-8);
  EXPECT_NEAR(p->x1[0] + p->x2[0], 0.0, 1e-8);
}

TEST(Pairs, CubicHasNone) {
  SolverConfig cfg;
  cfg.starts = 64;
  EXPECT_FALSE(find_preimage_pair(maps::cubic(), vec2(2, 2), Gauge::half_sq_euclid(), cfg));
}

TEST(Pairs, ComplexExpPeriod) {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.start_box = 8;
  cfg.seed = 7;
  const auto p = find_preimage_pair(maps::complex_exp(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->separation, 2 * M_PI, 1e-6);
  PairOptions far;
  far.selection = PairSelection::Farthest;
  const auto q = find_preimage_pair(maps::complex_exp(), vec2(1, 0), Gauge::half_sq_euclid(), cfg, far);
  ASSERT_TRUE(q);
  EXPECT_GE(q->separation, p->separation);
  // the farthest pair is still a multiple of the period
  const double m = q->separation / (2 * M_PI);
  EXPECT_NEAR(m, std::round(m), 1e-6);
}

TEST(Pairs, ShiftIdentityHoldsForFoundPairs) {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.start_box = 8;
  for (const auto& f : fninv::testing::corpus()) {
    for (const Vector& y : {vec2(1, 0), vec2(0, 0.5)}) {
      const auto p = find_preimage_pair(f, y, Gauge::half_sq_euclid(), cfg);
      if (!p) continue;
      EXPECT_LE((f.eval(p->x1) - y).norm(), cfg.tol_residual);
      EXPECT_LE((f.eval(p->x2) - y).norm(), cfg.tol_residual);
      const MeritFunction psi(shift_map(f, p->x2, p->value), vec2(0, 0), Gauge::half_sq_euclid());
      EXPECT_LE(psi.value(vec2(0, 0)), 1e-20) << f.label();
      EXPECT_LE(psi.value(p->x1 - p->x2), 1e-20) << f.label();
    }
  }
}
