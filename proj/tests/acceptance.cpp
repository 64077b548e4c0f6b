// Acceptance suite: one PASS/FAIL line per criterion, tolerances and time
// budgets as agreed for the toolkit. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "fninv/cli.hpp"
#include "fninv/mountain_pass.hpp"
#include "fninv/nonsmooth.hpp"
#include "fninv/probes.hpp"
#include "fninv/solve.hpp"

using namespace fninv;
using fninv::testing::vec2;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

// Every per-start solver result produced anywhere in this binary.
std::vector<InversionResult> g_runs;

std::vector<InversionResult> record(std::vector<InversionResult> rs) {
  g_runs.insert(g_runs.end(), rs.begin(), rs.end());
  return rs;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double newton_cubic(double y) {
  double x = std::cbrt(y);
  for (int i = 0; i < 100; ++i) {
    const double step = (x * x * x + x - y) / (3 * x * x + 1);
    x -= step;
    if (std::abs(step) < 1e-17 * (1 + std::abs(x))) break;
  }
  return x;
}

Outcome gradient_consistency() {
  double worst = 0.0;
  for (const auto& f : fninv::testing::corpus())
    for (const auto& g : {Gauge::half_sq_euclid(), Gauge::p_power(4)}) {
      const MeritFunction m(f, vec2(0.5, -0.25), g);
      for (const auto& x : fninv::testing::box_points(2, 100, -2, 2, 1)) {
        const Vector fd = fninv::testing::fd_gradient([&](const Vector& z) { return m.value(z); }, x);
        worst = std::max(worst, relative_discrepancy(m.gradient(x), fd));
      }
    }
  return {worst <= 1e-5, "worst relative error " + fmt("%.2e", worst) + " (limit 1e-5)"};
}

Outcome inverse_soundness() {
  Rng rng(2, 0);
  SolverConfig cfg;
  double worst_res = 0.0, worst_x = 0.0;
  bool all_solved = true;
  for (int k = 0; k < 50; ++k) {
    const Vector y = vec2(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const auto runs = record(invert_all_starts(maps::cubic(), y, Gauge::half_sq_euclid(), cfg));
    const auto r = invert_at(maps::cubic(), y, Gauge::half_sq_euclid(), cfg);
    all_solved = all_solved && r.status == SolveStatus::Solved;
    worst_res = std::max(worst_res, (maps::cubic().eval(r.x) - y).norm());
    for (int i = 0; i < 2; ++i) worst_x = std::max(worst_x, std::abs(r.x[i] - newton_cubic(y[i])));
  }
  return {all_solved && worst_res <= 1e-10 && worst_x <= 1e-8,
          std::string(all_solved ? "50/50 solved" : "not all solved") + ", max residual " + fmt("%.2e", worst_res) +
              ", max deviation from scalar Newton " + fmt("%.2e", worst_x)};
}

Outcome fermat_dichotomy() {
  // extra sweep across the corpus so the check sees singular critical points too
  SolverConfig cfg;
  cfg.starts = 32;
  for (const auto& f : fninv::testing::corpus())
    for (const auto& g : {Gauge::half_sq_euclid(), Gauge::p_power(4)})
      for (const Vector& y : {vec2(1, 0), vec2(0, 0), vec2(-2, 3)}) record(invert_all_starts(f, y, g, cfg));
  cfg.starts = 1;
  cfg.initial_points = {vec2(0, 0)};
  record(invert_all_starts(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg));

  std::size_t stationary = 0, violations = 0;
  for (const auto& r : g_runs) {
    if (r.gradient_norm > 1e-10) continue;
    ++stationary;
    if (!(r.residual_norm <= 1e-10 || r.sigma_min_at_x <= 1e-4)) ++violations;
  }
  return {violations == 0, std::to_string(g_runs.size()) + " runs, " + std::to_string(stationary) +
                               " stationary, " + std::to_string(violations) + " violations"};
}

Outcome mountain_pass_level() {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.seed = 7;
  const VectorMap f = maps::complex_square();
  record(invert_all_starts(f, vec2(1, 0), Gauge::half_sq_euclid(), cfg));
  const auto pair = find_preimage_pair(f, vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  if (!pair) return {false, "no preimage pair found"};
  const auto r = diagnose_noninjectivity(f, *pair, Gauge::half_sq_euclid());
  bool bound_ok = true;
  for (double v : r.max_value_trace) bound_ok = bound_ok && v >= r.lower_bound;
  // grid bottleneck minimax over [-1.5,3.5]x[-2.5,2.5]: level 0.5 at the origin
  const double oracle = 0.5;
  const bool ok = r.classification == PassClassification::SingularJacobianPoint && r.location.norm() <= 1e-2 &&
                  std::abs(r.level - oracle) <= 0.02 && bound_ok;
  return {ok, std::string(to_string(r.classification)) + " at distance " + fmt("%.2e", r.location.norm()) +
                  " from origin, level " + fmt("%.6f", r.level) + (bound_ok ? ", lower bound held" : ", lower bound broken")};
}

Outcome injectivity_witnesses() {
  SolverConfig cfg;
  cfg.starts = 64;
  cfg.seed = 7;
  record(invert_all_starts(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg));
  const auto sq = find_preimage_pair(maps::complex_square(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  cfg.start_box = 8;
  record(invert_all_starts(maps::complex_exp(), vec2(1, 0), Gauge::half_sq_euclid(), cfg));
  const auto ex = find_preimage_pair(maps::complex_exp(), vec2(1, 0), Gauge::half_sq_euclid(), cfg);
  if (!sq || !ex) return {false, "missing pair"};
  const bool sq_points = std::abs(std::abs(sq->x1[0]) - 1) <= 1e-8 && std::abs(sq->x1[0] + sq->x2[0]) <= 1e-8 &&
                         std::abs(sq->x1[1]) <= 1e-8 && std::abs(sq->x2[1]) <= 1e-8;
  const double e1 = std::abs(sq->separation - 2);
  const double e2 = std::abs(ex->separation - 2 * M_PI);
  return {sq_points && e1 <= 1e-8 && e2 <= 1e-6,
          "complex_square separation error " + fmt("%.2e", e1) + ", complex_exp separation error " + fmt("%.2e", e2)};
}

Outcome coercivity_closed_forms() {
  CoercivityOptions o;
  o.radii = {1, 2, 4, 8};
  const auto id = coercivity_probe(maps::identity(), vec2(5, 5), Gauge::half_sq_euclid(), o);
  const double id_err = std::abs(id.sphere_mins[3].min_value - 0.5 * std::pow(8 - std::sqrt(50.0), 2));
  const auto ex = coercivity_probe(maps::complex_exp(), vec2(0, 0), Gauge::half_sq_euclid(), o);
  double ex_err = 0.0;
  for (const auto& e : ex.sphere_mins) ex_err = std::max(ex_err, std::abs(e.min_value - 0.5 * std::exp(-2 * e.radius)));
  return {id_err <= 1e-3 && ex_err <= 1e-6 && ex.trend == CoercivityTrend::Bounded,
          "identity R=8 error " + fmt("%.2e", id_err) + ", complex_exp max error " + fmt("%.2e", ex_err) +
              ", trend " + to_string(ex.trend)};
}

Outcome regularity_localization() {
  RegularityOptions o;
  o.budget = 4096;
  o.refinement_depth = 6;
  const auto sq = jacobian_regularity_probe(maps::complex_square(), Box::cube(2, -1, 1), o);
  const auto rot = jacobian_regularity_probe(maps::rotation(M_PI / 3), Box::cube(2, -10, 10));
  const double rot_err = std::abs(rot.min_sigma.value - 1);
  return {sq.min_sigma.value <= 1e-4 && sq.min_sigma.location.norm() <= 1e-2 && rot_err <= 1e-12,
          "complex_square min sigma " + fmt("%.2e", sq.min_sigma.value) + " at distance " +
              fmt("%.2e", sq.min_sigma.location.norm()) + ", rotation error " + fmt("%.2e", rot_err)};
}

Outcome gauge_conditions() {
  const auto pass = check_gauge_conditions(Gauge::p_power(4), {0.125, 4, 1});
  const auto fail = check_gauge_conditions(Gauge::p_power(4), {1, 4, 1});
  double ratio = std::numeric_limits<double>::infinity();
  if (!fail.bound_violations.empty()) {
    const Vector& x = fail.worst_point;
    ratio = 0.25 * (std::pow(x[0], 4) + std::pow(x[1], 4)) / std::pow(x.norm(), 4);
  }
  return {pass.c1_holds && pass.c4_holds && !fail.c4_holds && ratio <= 0.2,
          std::string("(1/8,4,1) ") + (pass.c4_holds ? "holds" : "fails") + ", (1,4,1) " +
              (fail.c4_holds ? "holds" : "fails") + " with violating ratio " + fmt("%.4f", ratio)};
}

Outcome nonsmooth_estimators() {
  DirDerivativeOptions fine;
  fine.radii = {1e-5, 1e-6, 1e-7};
  double smooth_err = 0.0;
  Rng rng(9, 9);
  for (const auto& f : fninv::testing::corpus()) {
    const MeritFunction m(f, vec2(0.5, 0.5), Gauge::half_sq_euclid());
    for (int k = 0; k < 5; ++k) {
      const Vector u = vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const Vector z = rng.on_sphere(vec2(0, 0), 1.0);
      const double est = gen_dir_derivative([&](const Vector& x) { return m.value(x); }, u, z, fine);
      smooth_err = std::max(smooth_err, std::abs(est - m.gradient(u).dot(z)));
    }
  }
  const auto absx = [](const Vector& x) { return std::abs(x[0]); };
  const double plus = gen_dir_derivative(absx, vec2(0, 0), vec2(1, 0));
  const double minus = gen_dir_derivative(absx, vec2(0, 0), vec2(-1, 0));
  const GradientOracle absg = [](const Vector& x) -> std::optional<Vector> {
    if (x[0] == 0.0) return std::nullopt;
    return vec2(x[0] > 0 ? 1 : -1, 0);
  };
  SubdiffOptions so;
  so.radius = 1e-3;
  const double mn = clarke_subdiff_sample(absg, vec2(0, 0), so).min_norm;

  const VectorMap osc(
      1, [](const Vector& x) { return Vector::Constant(1, x[0] == 0 ? 0.0 : x[0] * x[0] * std::sin(1 / x[0])); },
      [](const Vector& x) {
        return Matrix::Constant(1, 1, x[0] == 0 ? 0.0 : 2 * x[0] * std::sin(1 / x[0]) - std::cos(1 / x[0]));
      },
      "x^2 sin(1/x)");
  const bool flagged = strictness_check(osc, Vector::Zero(1)).verdict == StrictnessVerdict::Violated;
  std::size_t inconsistent = 0;
  for (const auto& f : fninv::testing::corpus())
    for (const Vector& u : {vec2(0, 0), vec2(0.5, -0.3), vec2(-1.2, 0.8)})
      if (strictness_check(f, u).verdict != StrictnessVerdict::Consistent) ++inconsistent;

  const bool ok = smooth_err <= 1e-3 && std::abs(plus - 1) <= 1e-6 && std::abs(minus - 1) <= 1e-6 && mn <= 1e-2 &&
                  flagged && inconsistent == 0;
  return {ok, "smooth error " + fmt("%.2e", smooth_err) + ", |x1| derivatives " + fmt("%.9f", plus) + "/" +
                  fmt("%.9f", minus) + ", min norm " + fmt("%.2e", mn) + ", oscillation " +
                  (flagged ? "flagged" : "missed") + ", " + std::to_string(inconsistent) + " C1 false alarms"};
}

Outcome cli_determinism() {
  const std::vector<std::vector<std::string>> cmds = {
      {"invert", "--map", "builtin:complex_square", "--target", "1,0"},
      {"probe", "coercivity", "--map", "builtin:complex_exp", "--target", "0,0"},
      {"probe", "jacobian", "--map", "builtin:rotation:1.0472", "--region", "-10,10"},
      {"probe", "gauge", "--gauge", "p4", "--c", "0.125", "--alpha", "4", "--bigm", "1"},
      {"diagnose", "--map", "builtin:complex_square", "--target", "1,0", "--starts", "64"},
      {"report", "--map", "builtin:complex_exp", "--target", "1,0"},
  };
  std::size_t same = 0;
  for (auto args : cmds) {
    args.insert(args.end(), {"--seed", "7", "--json"});
    std::string outs[2];
    for (auto& o : outs) {
      std::ostringstream out, err;
      cli::run(args, out, err, std::nullopt);
      auto j = json::Json::parse(out.str());
      j.erase("wall_time_ms");
      o = j.dump();
    }
    if (outs[0] == outs[1]) ++same;
  }
  return {same == cmds.size(), std::to_string(same) + "/" + std::to_string(cmds.size()) + " commands byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_ms;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient consistency", 1000, gradient_consistency},
      {2, "inverse soundness", 1000, inverse_soundness},
      {4, "mountain-pass level", 5000, mountain_pass_level},
      {5, "non-injectivity witnesses", 2000, injectivity_witnesses},
      {3, "Fermat dichotomy", 60000, fermat_dichotomy},  // after every solver run above
      {6, "coercivity closed forms", 2000, coercivity_closed_forms},
      {7, "regularity localization", 2000, regularity_localization},
      {8, "gauge conditions", 1000, gauge_conditions},
      {9, "non-smooth estimators", 3000, nonsmooth_estimators},
      {10, "CLI determinism", 5000, cli_determinism},
  };
  int failures = 0;
  double total = 0.0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total += ms;
    const bool pass = o.pass && ms < c.budget_ms;
    failures += pass ? 0 : 1;
    std::printf("[%s] %2d %-26s %s; %.0f ms (budget %.0f ms)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                ms, c.budget_ms);
  }
  std::printf("%d of %zu criteria failed; total %.0f ms\n", failures, criteria.size(), total);
  return failures;
}
