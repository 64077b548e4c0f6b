#pragma once

// Command-line frontend. `run` is the whole tool; tools/fninv.cpp only wraps
// it so the tests can drive every command in-process.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fninv/builtin_maps.hpp"
#include "fninv/expr.hpp"
#include "fninv/mountain_pass.hpp"
#include "fninv/probes.hpp"
#include "fninv/report_json.hpp"
#include "fninv/solve.hpp"

namespace fninv::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int singular_critical_point = 2;
inline constexpr int max_iters = 3;
inline constexpr int falsified = 4;
inline constexpr int inconclusive = 5;
inline constexpr int pair_found = 6;
}  // namespace exit_code

inline int exit_for(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return exit_code::ok;
    case SolveStatus::SingularCriticalPoint: return exit_code::singular_critical_point;
    case SolveStatus::MaxItersExceeded: return exit_code::max_iters;
  }
  return exit_code::usage;
}

inline int exit_for(CoercivityTrend t) {
  switch (t) {
    case CoercivityTrend::Diverging: return exit_code::ok;
    case CoercivityTrend::Bounded: return exit_code::falsified;
    case CoercivityTrend::Inconclusive: return exit_code::inconclusive;
  }
  return exit_code::usage;
}

inline int exit_for(RegularityVerdict v) {
  return v == RegularityVerdict::NoSingularityFound ? exit_code::ok : exit_code::falsified;
}

inline int exit_for(const GaugeReport& r) { return r.c1_holds && r.c4_holds ? exit_code::ok : exit_code::falsified; }

inline int exit_for(DiffeoVerdict v) {
  return v == DiffeoVerdict::ConsistentWithGlobalDiffeo ? exit_code::ok : exit_code::falsified;
}

/// Bad flags, unreadable inputs, mismatched dimensions.
struct UsageError : Error {
  using Error::Error;
};

inline std::vector<double> parse_floats(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    item = b == std::string::npos ? std::string() : item.substr(b, e - b + 1);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw UsageError(flag + ": '" + text + "' is not a comma-separated list of numbers");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline Vector to_vector(const std::vector<double>& xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

inline Vector parse_target(const std::string& text, std::size_t n) {
  const auto xs = parse_floats(text, "--target");
  if (xs.size() != n)
    throw UsageError("dimension mismatch: the map has " + std::to_string(n) + " components but --target has " +
                     std::to_string(xs.size()) + " value" + (xs.size() == 1 ? "" : "s"));
  return to_vector(xs);
}

inline VectorMap load_map(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--map: expected builtin:<name> or expr:<path>, got '" + spec + "'");
  const std::string scheme = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  try {
    if (scheme == "builtin") return maps::builtin(rest).with_label(spec);
    if (scheme == "expr") return expr::to_vector_map(expr::parse_file(rest), spec);
  } catch (const ParseError& e) {
    throw UsageError("--map " + spec + ": " + e.what());
  } catch (const PreconditionViolation& e) {
    throw UsageError(std::string("--map: ") + e.what());
  }
  throw UsageError("--map: unknown scheme '" + scheme + "' (use builtin: or expr:)");
}

inline Gauge make_gauge(const std::string& name) {
  if (name == "half_sq") return Gauge::half_sq_euclid();
  if (name.size() > 1 && name[0] == 'p') {
    double p = 0.0;
    const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), p);
    if (res.ec == std::errc() && res.ptr == name.data() + name.size() && p >= 1.0) return Gauge::p_power(p);
  }
  throw UsageError("--gauge: expected half_sq or p<k> with k >= 1, got '" + name + "'");
}

inline std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  std::uint64_t s = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), s);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw UsageError(source + ": '" + text + "' is not a nonnegative integer seed");
  return s;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

inline std::string fmt(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

struct Options {
  std::string map;
  std::vector<std::string> targets;
  std::string gauge = "half_sq";
  std::size_t starts = 16;
  double box = 3.0;
  double tol = 1e-10;
  std::optional<std::uint64_t> seed_flag;
  bool json = false;
  std::string radii = "1,2,4,8,16";
  std::size_t samples = 0;
  std::string region = "-3,3";
  std::size_t budget = 1024;
  std::size_t depth = 4;
  double c = 0.0;
  double alpha = 0.0;
  double bigm = 0.0;
  std::size_t dim = 2;
  std::size_t segments = 64;
};

/// Everything a command produces: the payload, its config echo, the map
/// label and the exit code.
struct CommandOutput {
  json::Json config;
  json::Json result;
  std::string label;
  std::string text;
  int code = 0;
};

inline SolverConfig solver_config(const Options& o, std::uint64_t seed) {
  SolverConfig c;
  c.starts = o.starts;
  c.start_box = o.box;
  c.tol_residual = o.tol;
  c.tol_gradient = o.tol;
  c.seed = seed;
  c.validate();
  return c;
}

inline const std::string& single_target(const Options& o) {
  if (o.targets.size() != 1) throw UsageError("--target is required exactly once");
  return o.targets.front();
}

inline CommandOutput cmd_invert(const Options& o, std::uint64_t seed) {
  const VectorMap map = load_map(o.map);
  const Vector y = parse_target(single_target(o), map.dimension());
  const Gauge gauge = make_gauge(o.gauge);
  const SolverConfig cfg = solver_config(o, seed);
  const InversionResult r = invert_at(map, y, gauge, cfg);

  CommandOutput out;
  out.label = map.label();
  out.config = {{"target", json::vec(y)}, {"gauge", gauge.name()}, {"solver", json::encode(cfg)}};
  out.result = json::encode(r);
  out.code = exit_for(r.status);
  std::ostringstream t;
  t << "status: " << to_string(r.status) << "\n"
    << "x: " << fmt(r.x) << "\n"
    << "residual_norm: " << fmt(r.residual_norm) << "\n"
    << "gradient_norm: " << fmt(r.gradient_norm) << "\n"
    << "sigma_min: " << fmt(r.sigma_min_at_x) << "\n";
  if (r.failed_starts) t << "failed_starts: " << r.failed_starts << "\n";
  out.text = t.str();
  return out;
}

inline CoercivityOptions coercivity_options(const Options& o, std::uint64_t seed) {
  CoercivityOptions c;
  c.radii = parse_floats(o.radii, "--radii");
  if (o.samples) c.samples_per_sphere = o.samples;
  c.seed = seed;
  return c;
}

inline json::Json encode(const CoercivityOptions& c) {
  return {{"radii", json::nums(c.radii)},
          {"samples_per_sphere", c.samples_per_sphere},
          {"polish_iters", c.polish_iters},
          {"threshold", c.threshold ? json::num(*c.threshold) : json::Json(nullptr)},
          {"tolerance", json::num(c.tolerance)},
          {"seed", c.seed}};
}

inline json::Json encode(const RegularityOptions& r) {
  return {{"budget", r.budget},
          {"refinement_depth", r.refinement_depth},
          {"polish_evals", r.polish_evals},
          {"relative_threshold", json::num(r.relative_threshold)},
          {"seed", r.seed}};
}

inline json::Json encode(const DeformationConfig& d) {
  return {{"segments", d.segments},
          {"max_iters", d.max_iters},
          {"bump_halfwidth", d.bump_halfwidth},
          {"tol_gradient", json::num(d.tol_gradient)},
          {"tol_stall", json::num(d.tol_stall)},
          {"stall_window", d.stall_window},
          {"tol_sigma", json::num(d.tol_sigma)},
          {"tol_residual", json::num(d.tol_residual)},
          {"cluster_radius", json::num(d.cluster_radius)},
          {"max_length_factor", json::num(d.max_length_factor)},
          {"sphere", {{"samples", d.sphere.samples}, {"polish_iters", d.sphere.polish_iters}, {"seed", d.sphere.seed}}},
          {"seed", d.seed}};
}

inline std::string coercivity_text(const CoercivityReport& r) {
  std::ostringstream t;
  for (const auto& e : r.sphere_mins) t << "R = " << fmt(e.radius) << "  min = " << fmt(e.min_value) << "\n";
  t << "trend: " << to_string(r.trend) << "\n";
  return t.str();
}

inline CommandOutput cmd_probe_coercivity(const Options& o, std::uint64_t seed) {
  const VectorMap map = load_map(o.map);
  const Vector y = o.targets.empty() ? Vector::Zero(static_cast<Eigen::Index>(map.dimension()))
                                     : parse_target(single_target(o), map.dimension());
  const Gauge gauge = make_gauge(o.gauge);
  const CoercivityOptions opt = coercivity_options(o, seed);
  const CoercivityReport r = coercivity_probe(map, y, gauge, opt);

  CommandOutput out;
  out.label = map.label();
  out.config = {{"target", json::vec(y)}, {"gauge", gauge.name()}, {"coercivity", encode(opt)}};
  out.result = json::encode(r);
  out.code = exit_for(r.trend);
  out.text = coercivity_text(r);
  return out;
}

inline Box parse_region(const std::string& text, std::size_t n) {
  const auto xs = parse_floats(text, "--region");
  if (xs.size() == 2 && xs[0] < xs[1]) return Box::cube(n, xs[0], xs[1]);
  if (xs.size() == 2 * n) {
    Box b{Vector(static_cast<Eigen::Index>(n)), Vector(static_cast<Eigen::Index>(n))};
    for (std::size_t i = 0; i < n; ++i) {
      b.lo[static_cast<Eigen::Index>(i)] = xs[2 * i];
      b.hi[static_cast<Eigen::Index>(i)] = xs[2 * i + 1];
      if (!(xs[2 * i] < xs[2 * i + 1])) throw UsageError("--region: each lower bound must be below its upper bound");
    }
    return b;
  }
  throw UsageError("--region: expected lo,hi or lo1,hi1,...,lon,hin");
}

inline CommandOutput cmd_probe_jacobian(const Options& o, std::uint64_t seed) {
  const VectorMap map = load_map(o.map);
  const Box region = parse_region(o.region, map.dimension());
  RegularityOptions opt;
  opt.budget = o.budget;
  opt.refinement_depth = o.depth;
  opt.seed = seed;
  const RegularityReport r = jacobian_regularity_probe(map, region, opt);

  CommandOutput out;
  out.label = map.label();
  out.config = {{"region", {{"lo", json::vec(region.lo)}, {"hi", json::vec(region.hi)}}},
                {"regularity", encode(opt)}};
  out.result = json::encode(r);
  out.code = exit_for(r.verdict);
  std::ostringstream t;
  t << "min |det|: " << fmt(r.min_abs_det.value) << " at " << fmt(r.min_abs_det.location) << "\n"
    << "min sigma_min: " << fmt(r.min_sigma.value) << " at " << fmt(r.min_sigma.location) << "\n"
    << "verdict: " << to_string(r.verdict) << "\n";
  out.text = t.str();
  return out;
}

inline CommandOutput cmd_probe_gauge(const Options& o, std::uint64_t seed) {
  const Gauge gauge = make_gauge(o.gauge);
  const GaugeBound bound{o.c, o.alpha, o.bigm};
  GaugeCheckOptions opt;
  opt.dimension = o.dim;
  if (o.samples) opt.samples = o.samples;
  opt.seed = seed;
  GaugeReport r;
  try {
    r = check_gauge_conditions(gauge, bound, opt);
  } catch (const PreconditionViolation& e) {
    throw UsageError(e.what());
  }

  CommandOutput out;
  out.label = gauge.name();
  out.config = {{"gauge", gauge.name()},
                {"c", json::num(o.c)},
                {"alpha", json::num(o.alpha)},
                {"bigm", json::num(o.bigm)},
                {"dimension", opt.dimension},
                {"samples", opt.samples},
                {"seed", opt.seed}};
  out.result = json::encode(r);
  out.code = exit_for(r);
  std::ostringstream t;
  t << "c1: " << (r.c1_holds ? "holds" : "fails") << "\n"
    << "c4: " << (r.c4_holds ? "holds" : "fails") << "  worst ratio " << fmt(r.worst_ratio) << " at "
    << fmt(r.worst_point) << "\n";
  out.text = t.str();
  return out;
}

inline DeformationConfig deformation_config(const Options& o, std::uint64_t seed) {
  DeformationConfig d;
  d.segments = o.segments;
  d.seed = seed;
  d.sphere.seed = seed;
  return d;
}

inline std::string diagnosis_text(const PreimagePair& p, const MountainPassResult& m) {
  std::ostringstream t;
  t << "pair: " << fmt(p.x1) << " and " << fmt(p.x2) << "  separation " << fmt(p.separation) << "\n"
    << "classification: " << to_string(m.classification) << "\n"
    << "location: " << fmt(m.location) << "\n"
    << "level: " << fmt(m.level) << "\n"
    << "sigma_min: " << fmt(m.sigma_min) << "\n";
  return t.str();
}

inline CommandOutput cmd_diagnose(const Options& o, std::uint64_t seed) {
  const VectorMap map = load_map(o.map);
  const Vector y = parse_target(single_target(o), map.dimension());
  const Gauge gauge = make_gauge(o.gauge);
  const SolverConfig cfg = solver_config(o, seed);
  if (o.segments < 2) throw UsageError("--segments must be at least 2");
  const DeformationConfig def = deformation_config(o, seed);

  CommandOutput out;
  out.label = map.label();
  out.config = {{"target", json::vec(y)}, {"gauge", gauge.name()}, {"solver", json::encode(cfg)},
                {"deformation", encode(def)}};
  const auto pair = find_preimage_pair(map, y, gauge, cfg);
  if (!pair) {
    out.result = {{"pair", nullptr}, {"diagnosis", nullptr}};
    out.code = exit_code::ok;
    out.text = "no pair found\n";
    return out;
  }
  const MountainPassResult m = diagnose_noninjectivity(map, *pair, gauge, def);
  out.result = {{"pair", json::encode(*pair)}, {"diagnosis", json::encode(m)}};
  out.code = exit_code::pair_found;
  out.text = diagnosis_text(*pair, m);
  return out;
}

inline CommandOutput cmd_report(const Options& o, std::uint64_t seed) {
  const VectorMap map = load_map(o.map);
  std::vector<Vector> targets;
  for (const auto& t : o.targets) targets.push_back(parse_target(t, map.dimension()));
  if (targets.empty()) targets.push_back(Vector::Zero(static_cast<Eigen::Index>(map.dimension())));
  const Gauge gauge = make_gauge(o.gauge);

  ReportConfig rc;
  rc.solver = solver_config(o, seed);
  rc.regularity.budget = o.budget;
  rc.regularity.refinement_depth = o.depth;
  rc.regularity.seed = seed;
  rc.coercivity = coercivity_options(o, seed);
  rc.deformation = deformation_config(o, seed);
  const DiffeoReport r = global_diffeo_report(map, gauge, targets, rc);

  CommandOutput out;
  out.label = map.label();
  json::Json ts = json::Json::array();
  for (const auto& y : targets) ts.push_back(json::vec(y));
  out.config = {{"targets", ts},
                {"gauge", gauge.name()},
                {"region_half_width", json::num(rc.region_half_width.value_or(rc.solver.start_box))},
                {"solver", json::encode(rc.solver)},
                {"regularity", encode(rc.regularity)},
                {"coercivity", encode(rc.coercivity)},
                {"probe_origin", rc.probe_origin},
                {"deformation", encode(rc.deformation)}};
  out.result = json::encode(r);
  out.code = exit_for(r.verdict);
  std::ostringstream t;
  t << "regularity: " << to_string(r.regularity.verdict) << " (min sigma_min " << fmt(r.regularity.min_sigma.value)
    << ")\n";
  if (r.origin_coercivity) t << "coercivity at 0: " << to_string(r.origin_coercivity->trend) << "\n";
  for (const auto& tg : r.targets)
    t << "target " << fmt(tg.target) << ": coercivity " << to_string(tg.coercivity.trend) << ", inversion "
      << to_string(tg.inversion.status) << " at " << fmt(tg.inversion.x) << "\n";
  if (r.pair && r.diagnosis) t << diagnosis_text(*r.pair, *r.diagnosis);
  t << "verdict: " << to_string(r.verdict);
  for (std::size_t i = 0; i < r.evidence.size(); ++i) t << (i ? ", " : " (") << r.evidence[i];
  t << (r.evidence.empty() ? "\n" : ")\n");
  out.text = t.str();
  return out;
}

/// Runs the tool. `env_seed` stands in for FNINV_SEED.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const std::optional<std::string>& env_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Options o;
  CLI::App app{"Global-inverse diagnostics for maps R^n -> R^n", "fninv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto add_seed_json = [&](CLI::App* c) {
    c->add_option("--seed", o.seed_flag, "RNG seed (default: FNINV_SEED, else 0)");
    c->add_flag("--json", o.json, "Print a single JSON report");
  };
  auto add_map = [&](CLI::App* c) { c->add_option("--map", o.map, "builtin:<name> or expr:<path>")->required(); };
  auto add_solver = [&](CLI::App* c) {
    c->add_option("--gauge", o.gauge, "half_sq or p<k>");
    c->add_option("--starts", o.starts, "Number of multistart points")->check(CLI::PositiveNumber);
    c->add_option("--box", o.box, "Start box half-width")->check(CLI::PositiveNumber);
    c->add_option("--tol", o.tol, "Residual and gradient tolerance")->check(CLI::PositiveNumber);
  };

  auto* invert = app.add_subcommand("invert", "Solve f(x) = y by multistart descent");
  add_map(invert);
  invert->add_option("--target", o.targets, "Comma-separated target y")->required()->expected(1);
  add_solver(invert);
  add_seed_json(invert);

  auto* probe = app.add_subcommand("probe", "Hypothesis probes");
  probe->require_subcommand(1);
  auto* coer = probe->add_subcommand("coercivity", "Sphere minima of the merit function");
  add_map(coer);
  coer->add_option("--target", o.targets, "Comma-separated target y (default 0)")->expected(1);
  coer->add_option("--gauge", o.gauge, "half_sq or p<k>");
  coer->add_option("--radii", o.radii, "Comma-separated radii");
  coer->add_option("--samples", o.samples, "Samples per sphere")->check(CLI::PositiveNumber);
  add_seed_json(coer);
  auto* jac = probe->add_subcommand("jacobian", "Search a box for near-singular Jacobians");
  add_map(jac);
  jac->add_option("--region", o.region, "lo,hi or lo1,hi1,...");
  jac->add_option("--budget", o.budget, "Samples per stage")->check(CLI::PositiveNumber);
  jac->add_option("--depth", o.depth, "Refinement stages");
  add_seed_json(jac);
  auto* gau = probe->add_subcommand("gauge", "Check the gauge conditions");
  gau->add_option("--gauge", o.gauge, "half_sq or p<k>");
  gau->add_option("--c", o.c, "Bound constant c")->required();
  gau->add_option("--alpha", o.alpha, "Bound exponent alpha")->required();
  gau->add_option("--bigm", o.bigm, "Ball radius M")->required();
  gau->add_option("--dim", o.dim, "Dimension")->check(CLI::PositiveNumber);
  gau->add_option("--samples", o.samples, "Sample count")->check(CLI::PositiveNumber);
  add_seed_json(gau);

  auto* diag = app.add_subcommand("diagnose", "Look for a preimage pair and run the mountain pass");
  add_map(diag);
  diag->add_option("--target", o.targets, "Comma-separated target y")->required()->expected(1);
  add_solver(diag);
  diag->add_option("--segments", o.segments, "Path segments");
  add_seed_json(diag);

  auto* rep = app.add_subcommand("report", "All probes, solver and diagnosis in one verdict");
  add_map(rep);
  rep->add_option("--target", o.targets, "Comma-separated target y (repeatable)")->take_all();
  add_solver(rep);
  rep->add_option("--radii", o.radii, "Coercivity radii");
  rep->add_option("--budget", o.budget, "Regularity samples per stage")->check(CLI::PositiveNumber);
  rep->add_option("--depth", o.depth, "Regularity refinement stages");
  rep->add_option("--segments", o.segments, "Path segments");
  add_seed_json(rep);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "fninv: " << e.what() << "\n";
    return exit_code::usage;
  }

  std::string command;
  CommandOutput res;
  try {
    const std::uint64_t seed = o.seed_flag ? *o.seed_flag : env_seed ? parse_seed(*env_seed, "FNINV_SEED") : 0;
    if (invert->parsed()) {
      command = "invert";
      res = cmd_invert(o, seed);
    } else if (coer->parsed()) {
      command = "probe coercivity";
      res = cmd_probe_coercivity(o, seed);
    } else if (jac->parsed()) {
      command = "probe jacobian";
      res = cmd_probe_jacobian(o, seed);
    } else if (gau->parsed()) {
      command = "probe gauge";
      res = cmd_probe_gauge(o, seed);
    } else if (diag->parsed()) {
      command = "diagnose";
      res = cmd_diagnose(o, seed);
    } else {
      command = "report";
      res = cmd_report(o, seed);
    }
  } catch (const UsageError& e) {
    err << "fninv: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const Error& e) {
    err << "fninv: " << e.what() << "\n";
    return exit_code::usage;
  }

  if (o.json) {
    json::Json j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["invocation"] = args;
    j["map"] = res.label;
    j["config"] = res.config;
    j["result"] = res.result;
    j["exit_code"] = res.code;
    const auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    j["wall_time_ms"] = dt;
    out << j.dump(2) << "\n";
  } else {
    out << res.text;
  }
  return res.code;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const char* env = std::getenv("FNINV_SEED");
  return run(args, out, err, env ? std::optional<std::string>(env) : std::nullopt);
}

}  // namespace fninv::cli
