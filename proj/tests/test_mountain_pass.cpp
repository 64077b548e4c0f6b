#include <cmath>

#include <gtest/gtest.h>

#include "corpus.hpp"
#include "fninv/mountain_pass.hpp"

using namespace fninv;
using fninv::testing::vec2;

namespace {

MeritFunction shifted_square() {
  return MeritFunction(shift_map(maps::complex_square(), vec2(-1, 0), vec2(1, 0)), vec2(0, 0),
                       Gauge::half_sq_euclid());
}

void check_invariants(const MountainPassResult& r, const Vector& u1, const Vector& u2) {
  for (std::size_t k = 0; k < r.max_value_trace.size(); ++k) {
    EXPECT_GE(r.max_value_trace[k], r.lower_bound);
    if (k) EXPECT_LE(r.max_value_trace[k], r.max_value_trace[k - 1]);
  }
  ASSERT_FALSE(r.path.vertices.empty());
  EXPECT_EQ(r.path.vertices.front(), u1);
  EXPECT_EQ(r.path.vertices.back(), u2);
  EXPECT_GE(r.level, r.lower_bound);
}

}  // namespace

TEST(SphereMin, Examples) {
  const MeritFunction bowl(shift_map(maps::identity(), vec2(0, 0), vec2(0, 0)), vec2(0, 0), Gauge::half_sq_euclid());
  EXPECT_NEAR(sphere_min(bowl, 1.0).value, 0.5, 1e-14);
  // dense 1e5-point scan of the circle: 0.28125 at (0.5, 0)
  const auto s = sphere_min(shifted_square(), 0.5);
  EXPECT_NEAR(s.value, 0.28125, 1e-9);
  EXPECT_NEAR((s.point - vec2(0.5, 0)).norm(), 0.0, 1e-4);
  EXPECT_NEAR(s.point.norm(), 0.5, 1e-14);
  EXPECT_GE(sphere_min(shifted_square(), 3.0).value, 0.0);
}

TEST(MountainPass, ComplexSquareLevel) {
  // grid bottleneck oracle on [-1.5,3.5]x[-2.5,2.5] (201 and 401 nodes): 0.5 at v = (1, 0)
  const auto psi = shifted_square();
  const auto r = mountain_pass_search(psi, vec2(0, 0), vec2(2, 0));
  EXPECT_EQ(r.classification, PassClassification::SingularJacobianPoint);
  EXPECT_NEAR(r.level, 0.5, 0.02);
  EXPECT_LE((r.v - vec2(1, 0)).norm(), 1e-2);
  EXPECT_LE(min_singular_value(psi.map().jacobian(r.v)), DeformationConfig{}.tol_sigma);
  check_invariants(r, vec2(0, 0), vec2(2, 0));
}

TEST(MountainPass, StraightPathIsDeformedDown) {
  // e^z between 0 and 2 pi i: the segment peaks at |e^{i pi} - 1|^2 / 2 = 2, while
  // paths escaping to Re z -> -inf approach the infimum 1/2
  const MeritFunction psi(maps::complex_exp(), vec2(1, 0), Gauge::half_sq_euclid());
  const auto r = mountain_pass_search(psi, vec2(0, 0), vec2(0, 2 * M_PI));
  EXPECT_NEAR(r.max_value_trace.front(), 2.0, 1e-12);
  EXPECT_LT(r.level, 0.51);
  EXPECT_GE(r.level, 0.5);
  check_invariants(r, vec2(0, 0), vec2(0, 2 * M_PI));
}

TEST(MountainPass, Preconditions) {
  const MeritFunction cubic(maps::cubic(), vec2(2, 2), Gauge::half_sq_euclid());
  EXPECT_THROW(mountain_pass_search(cubic, vec2(1, 1), vec2(1, 1)), PreconditionViolation);
  const MeritFunction bowl(maps::identity(), vec2(0, 0), Gauge::half_sq_euclid());
  EXPECT_THROW(mountain_pass_search(bowl, vec2(-1, 0), vec2(1, 0)), PreconditionViolation);
  DeformationConfig loose;
  loose.require_zero_endpoints = false;
  const auto r = mountain_pass_search(bowl, vec2(-1, 0), vec2(1, 0), loose);
  EXPECT_GE(r.level, 0.5);
  check_invariants(r, vec2(-1, 0), vec2(1, 0));
  EXPECT_THROW(mountain_pass_search(bowl, Vector::Zero(3), Vector::Ones(3), loose), DimensionMismatch);
}

TEST(Diagnose, ComplexSquare) {
  PreimagePair p{vec2(1, 0), vec2(-1, 0), vec2(1, 0), 2.0};
  const auto r = diagnose_noninjectivity(maps::complex_square(), p, Gauge::half_sq_euclid());
  EXPECT_EQ(r.classification, PassClassification::SingularJacobianPoint);
  EXPECT_LE(r.location.norm(), 1e-2);
  EXPECT_NEAR(r.level, 0.5, 0.02);
  ASSERT_TRUE(r.geometry);
  EXPECT_DOUBLE_EQ(r.geometry->rho, 1.0);
  EXPECT_GT(r.geometry->sphere_min_value, 0.0);
  EXPECT_TRUE(r.geometry->certified_by_sampling);
}

TEST(Diagnose, FoldCubicEitherOutcomeIsVerified) {
  // grid minimax on f(x) = (x1^3 - 3 x1, x2) between (0,0) and (sqrt3,0): level ~2 at x1 ~ 1
  const VectorMap f = maps::fold_cubic();
  PreimagePair p{vec2(std::sqrt(3.0), 0), vec2(0, 0), vec2(0, 0), std::sqrt(3.0)};
  const auto r = diagnose_noninjectivity(f, p, Gauge::half_sq_euclid());
  ASSERT_NE(r.classification, PassClassification::Unresolved);
  if (r.classification == PassClassification::ThirdPreimage) {
    EXPECT_LE(f.eval(r.location).norm(), 1e-8);
  } else {
    EXPECT_LE(min_singular_value(f.jacobian(r.location)), 1e-3);
  }
  // regression baseline: the canonical config lands on the fold x1 = 1 at level 2
  EXPECT_EQ(r.classification, PassClassification::SingularJacobianPoint);
  EXPECT_NEAR(r.location[0], 1.0, 1e-3);
  EXPECT_NEAR(r.level, 2.0, 1e-3);
}

TEST(Diagnose, CounterexamplesAreClassified) {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.start_box = 8;
  cfg.seed = 7;
  for (const char* name : {"complex_square", "complex_exp", "fold_cubic"}) {
    const VectorMap f = maps::builtin(name);
    const auto p = find_preimage_pair(f, vec2(1, 0), Gauge::half_sq_euclid(), cfg);
    ASSERT_TRUE(p) << name;
    const auto r = diagnose_noninjectivity(f, *p, Gauge::half_sq_euclid());
    EXPECT_NE(r.classification, PassClassification::Unresolved) << name;
    if (r.classification == PassClassification::ThirdPreimage)
      EXPECT_LE((f.eval(r.location) - p->value).norm(), 1e-8) << name;
    if (r.classification == PassClassification::SingularJacobianPoint)
      EXPECT_LE(min_singular_value(f.jacobian(r.location)), 1e-3) << name;
  }
}

TEST(Diagnose, Deterministic) {
  PreimagePair p{vec2(1, 0), vec2(-1, 0), vec2(1, 0), 2.0};
  const auto a = diagnose_noninjectivity(maps::complex_square(), p, Gauge::half_sq_euclid());
  const auto b = diagnose_noninjectivity(maps::complex_square(), p, Gauge::half_sq_euclid());
  EXPECT_EQ(a.location, b.location);
  EXPECT_EQ(a.max_value_trace, b.max_value_trace);
}
