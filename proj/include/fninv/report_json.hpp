#pragma once

// JSON encoding of every result type. Field order is fixed by nlohmann's
// ordered_json, so serialized reports are byte-stable for identical inputs.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fninv/map_model.hpp"
#include "fninv/mountain_pass.hpp"
#include "fninv/probes.hpp"
#include "fninv/solve.hpp"

namespace fninv::json {

using Json = nlohmann::ordered_json;

/// Non-finite doubles become the strings "inf", "-inf", "nan".
inline Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num_from(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("not a number: " + s);
  }
  return j.get<double>();
}

inline Json vec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

inline Vector vec_from(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = num_from(j[i]);
  return v;
}

inline Json vecs(const std::vector<Vector>& vs) {
  Json a = Json::array();
  for (const auto& v : vs) a.push_back(vec(v));
  return a;
}

inline std::vector<Vector> vecs_from(const Json& j) {
  std::vector<Vector> out;
  for (const auto& e : j) out.push_back(vec_from(e));
  return out;
}

inline Json nums(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

inline std::vector<double> nums_from(const Json& j) {
  std::vector<double> out;
  for (const auto& e : j) out.push_back(num_from(e));
  return out;
}

template <typename Enum, std::size_t N>
Enum enum_from(const Json& j, const Enum (&values)[N]) {
  const auto s = j.get<std::string>();
  for (Enum e : values)
    if (s == to_string(e)) return e;
  throw std::invalid_argument("unknown enum value: " + s);
}

// --- solver ---------------------------------------------------------------

inline Json encode(const SolverConfig& c) {
  Json j;
  j["starts"] = c.starts;
  j["start_box"] = num(c.start_box);
  j["tol_residual"] = num(c.tol_residual);
  j["tol_gradient"] = num(c.tol_gradient);
  j["max_iters"] = c.max_iters;
  j["damping"] = {{"initial", num(c.damping.initial)},
                  {"grow", num(c.damping.grow)},
                  {"shrink", num(c.damping.shrink)},
                  {"ceiling", num(c.damping.ceiling)}};
  j["armijo"] = {{"slope", num(c.armijo.slope)},
                 {"backtrack", num(c.armijo.backtrack)},
                 {"max_backtracks", c.armijo.max_backtracks}};
  j["seed"] = c.seed;
  j["initial_points"] = vecs(c.initial_points);
  return j;
}

inline SolverConfig decode_solver_config(const Json& j) {
  SolverConfig c;
  c.starts = j.at("starts").get<std::size_t>();
  c.start_box = num_from(j.at("start_box"));
  c.tol_residual = num_from(j.at("tol_residual"));
  c.tol_gradient = num_from(j.at("tol_gradient"));
  c.max_iters = j.at("max_iters").get<std::size_t>();
  const auto& d = j.at("damping");
  c.damping = {num_from(d.at("initial")), num_from(d.at("grow")), num_from(d.at("shrink")),
               num_from(d.at("ceiling"))};
  const auto& a = j.at("armijo");
  c.armijo = {num_from(a.at("slope")), num_from(a.at("backtrack")), a.at("max_backtracks").get<std::size_t>()};
  c.seed = j.at("seed").get<std::uint64_t>();
  c.initial_points = vecs_from(j.at("initial_points"));
  return c;
}

inline Json encode(const InversionResult& r) {
  Json j;
  j["status"] = to_string(r.status);
  j["x"] = vec(r.x);
  j["residual_norm"] = num(r.residual_norm);
  j["gradient_norm"] = num(r.gradient_norm);
  j["sigma_min_at_x"] = num(r.sigma_min_at_x);
  j["iterations"] = r.iterations;
  j["evaluations"] = r.evaluations;
  j["start_index"] = r.start_index;
  j["failed_starts"] = r.failed_starts;
  return j;
}

inline InversionResult decode_inversion(const Json& j) {
  static constexpr SolveStatus all[] = {SolveStatus::Solved, SolveStatus::SingularCriticalPoint,
                                        SolveStatus::MaxItersExceeded};
  InversionResult r;
  r.status = enum_from(j.at("status"), all);
  r.x = vec_from(j.at("x"));
  r.residual_norm = num_from(j.at("residual_norm"));
  r.gradient_norm = num_from(j.at("gradient_norm"));
  r.sigma_min_at_x = num_from(j.at("sigma_min_at_x"));
  r.iterations = j.at("iterations").get<std::size_t>();
  r.evaluations = j.at("evaluations").get<std::size_t>();
  r.start_index = j.at("start_index").get<std::size_t>();
  r.failed_starts = j.at("failed_starts").get<std::size_t>();
  return r;
}

inline Json encode(const PreimagePair& p) {
  return {{"x1", vec(p.x1)}, {"x2", vec(p.x2)}, {"value", vec(p.value)}, {"separation", num(p.separation)}};
}

inline PreimagePair decode_pair(const Json& j) {
  PreimagePair p;
  p.x1 = vec_from(j.at("x1"));
  p.x2 = vec_from(j.at("x2"));
  p.value = vec_from(j.at("value"));
  p.separation = num_from(j.at("separation"));
  return p;
}

// --- probes ---------------------------------------------------------------

inline Json encode(const CoercivityReport& r) {
  Json j;
  j["radii"] = nums(r.radii);
  Json mins = Json::array();
  for (const auto& e : r.sphere_mins)
    mins.push_back({{"radius", num(e.radius)}, {"min_value", num(e.min_value)}, {"argmin", vec(e.argmin)}});
  j["sphere_mins"] = mins;
  j["trend"] = to_string(r.trend);
  j["threshold"] = num(r.threshold);
  j["tolerance"] = num(r.tolerance);
  return j;
}

inline CoercivityReport decode_coercivity(const Json& j) {
  static constexpr CoercivityTrend all[] = {CoercivityTrend::Diverging, CoercivityTrend::Bounded,
                                            CoercivityTrend::Inconclusive};
  CoercivityReport r;
  r.radii = nums_from(j.at("radii"));
  for (const auto& e : j.at("sphere_mins"))
    r.sphere_mins.push_back({num_from(e.at("radius")), num_from(e.at("min_value")), vec_from(e.at("argmin"))});
  r.trend = enum_from(j.at("trend"), all);
  r.threshold = num_from(j.at("threshold"));
  r.tolerance = num_from(j.at("tolerance"));
  return r;
}

inline Json encode(const LocatedValue& v) { return {{"value", num(v.value)}, {"location", vec(v.location)}}; }
inline LocatedValue decode_located(const Json& j) { return {num_from(j.at("value")), vec_from(j.at("location"))}; }

inline Json encode(const RegularityReport& r) {
  Json j;
  j["region"] = {{"lo", vec(r.region.lo)}, {"hi", vec(r.region.hi)}};
  j["samples"] = r.samples;
  j["refinement_depth"] = r.refinement_depth;
  j["min_abs_det"] = encode(r.min_abs_det);
  j["min_sigma"] = encode(r.min_sigma);
  j["sigma_max_at_min"] = num(r.sigma_max_at_min);
  j["min_sigma_by_stage"] = nums(r.min_sigma_by_stage);
  j["verdict"] = to_string(r.verdict);
  return j;
}

inline RegularityReport decode_regularity(const Json& j) {
  static constexpr RegularityVerdict all[] = {RegularityVerdict::NoSingularityFound,
                                              RegularityVerdict::NearSingularPointFound};
  RegularityReport r;
  r.region = {vec_from(j.at("region").at("lo")), vec_from(j.at("region").at("hi"))};
  r.samples = j.at("samples").get<std::size_t>();
  r.refinement_depth = j.at("refinement_depth").get<std::size_t>();
  r.min_abs_det = decode_located(j.at("min_abs_det"));
  r.min_sigma = decode_located(j.at("min_sigma"));
  r.sigma_max_at_min = num_from(j.at("sigma_max_at_min"));
  r.min_sigma_by_stage = nums_from(j.at("min_sigma_by_stage"));
  r.verdict = enum_from(j.at("verdict"), all);
  return r;
}

inline Json encode(const GaugeReport& r) {
  Json j;
  j["dimension"] = r.dimension;
  j["samples"] = r.samples;
  j["c1"] = {{"eta_at_zero", num(r.eta_at_zero)},
             {"grad_norm_at_zero", num(r.grad_norm_at_zero)},
             {"positivity_violations", vecs(r.positivity_violations)},
             {"holds", r.c1_holds}};
  j["c4"] = {{"c", num(r.bound.c)},
             {"alpha", num(r.bound.alpha)},
             {"bigm", num(r.bound.bigm)},
             {"worst_ratio", num(r.worst_ratio)},
             {"worst_point", vec(r.worst_point)},
             {"violations", vecs(r.bound_violations)},
             {"holds", r.c4_holds}};
  return j;
}

inline GaugeReport decode_gauge_report(const Json& j) {
  GaugeReport r;
  r.dimension = j.at("dimension").get<std::size_t>();
  r.samples = j.at("samples").get<std::size_t>();
  const auto& c1 = j.at("c1");
  r.eta_at_zero = num_from(c1.at("eta_at_zero"));
  r.grad_norm_at_zero = num_from(c1.at("grad_norm_at_zero"));
  r.positivity_violations = vecs_from(c1.at("positivity_violations"));
  r.c1_holds = c1.at("holds").get<bool>();
  const auto& c4 = j.at("c4");
  r.bound = {num_from(c4.at("c")), num_from(c4.at("alpha")), num_from(c4.at("bigm"))};
  r.worst_ratio = num_from(c4.at("worst_ratio"));
  r.worst_point = vec_from(c4.at("worst_point"));
  r.bound_violations = vecs_from(c4.at("violations"));
  r.c4_holds = c4.at("holds").get<bool>();
  return r;
}

// --- mountain pass --------------------------------------------------------

inline Json encode(const MountainPassResult& r) {
  Json j;
  j["classification"] = to_string(r.classification);
  j["v"] = vec(r.v);
  j["location"] = vec(r.location);
  j["level"] = num(r.level);
  j["gradient_norm"] = num(r.gradient_norm);
  j["residual_norm"] = num(r.residual_norm);
  j["sigma_min"] = num(r.sigma_min);
  if (r.geometry) {
    j["geometry"] = {{"rho", num(r.geometry->rho)},
                     {"sphere_min_value", num(r.geometry->sphere_min_value)},
                     {"sphere_min_point", vec(r.geometry->sphere_min_point)},
                     {"certified_by_sampling", r.geometry->certified_by_sampling}};
  } else {
    j["geometry"] = nullptr;
  }
  j["path"] = {{"vertices", vecs(r.path.vertices)},
               {"max_index", r.path.max_index},
               {"max_value", num(r.path.max_value)},
               {"iteration", r.path.iteration}};
  j["lower_bound"] = num(r.lower_bound);
  j["max_value_trace"] = nums(r.max_value_trace);
  j["converged"] = r.converged;
  j["stop_reason"] = r.stop_reason;
  return j;
}

inline MountainPassResult decode_mountain_pass(const Json& j) {
  static constexpr PassClassification all[] = {PassClassification::ThirdPreimage,
                                               PassClassification::SingularJacobianPoint,
                                               PassClassification::Unresolved};
  MountainPassResult r;
  r.classification = enum_from(j.at("classification"), all);
  r.v = vec_from(j.at("v"));
  r.location = vec_from(j.at("location"));
  r.level = num_from(j.at("level"));
  r.gradient_norm = num_from(j.at("gradient_norm"));
  r.residual_norm = num_from(j.at("residual_norm"));
  r.sigma_min = num_from(j.at("sigma_min"));
  if (!j.at("geometry").is_null()) {
    const auto& g = j.at("geometry");
    r.geometry = SphereGeometry{num_from(g.at("rho")), num_from(g.at("sphere_min_value")),
                                vec_from(g.at("sphere_min_point")), g.at("certified_by_sampling").get<bool>()};
  }
  const auto& p = j.at("path");
  r.path.vertices = vecs_from(p.at("vertices"));
  r.path.max_index = p.at("max_index").get<std::size_t>();
  r.path.max_value = num_from(p.at("max_value"));
  r.path.iteration = p.at("iteration").get<std::size_t>();
  r.lower_bound = num_from(j.at("lower_bound"));
  r.max_value_trace = nums_from(j.at("max_value_trace"));
  r.converged = j.at("converged").get<bool>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  return r;
}

// --- combined report ------------------------------------------------------

inline Json encode(const DiffeoReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["evidence"] = r.evidence;
  j["regularity"] = encode(r.regularity);
  j["origin_coercivity"] = r.origin_coercivity ? encode(*r.origin_coercivity) : Json(nullptr);
  Json ts = Json::array();
  for (const auto& t : r.targets)
    ts.push_back({{"target", vec(t.target)}, {"coercivity", encode(t.coercivity)}, {"inversion", encode(t.inversion)}});
  j["targets"] = ts;
  j["pair"] = r.pair ? encode(*r.pair) : Json(nullptr);
  j["diagnosis"] = r.diagnosis ? encode(*r.diagnosis) : Json(nullptr);
  return j;
}

inline DiffeoReport decode_diffeo(const Json& j) {
  static constexpr DiffeoVerdict all[] = {DiffeoVerdict::ConsistentWithGlobalDiffeo,
                                          DiffeoVerdict::CounterexampleEvidence};
  DiffeoReport r;
  r.verdict = enum_from(j.at("verdict"), all);
  r.evidence = j.at("evidence").get<std::vector<std::string>>();
  r.regularity = decode_regularity(j.at("regularity"));
  if (!j.at("origin_coercivity").is_null()) r.origin_coercivity = decode_coercivity(j.at("origin_coercivity"));
  for (const auto& t : j.at("targets"))
    r.targets.push_back({vec_from(t.at("target")), decode_coercivity(t.at("coercivity")),
                         decode_inversion(t.at("inversion"))});
  if (!j.at("pair").is_null()) r.pair = decode_pair(j.at("pair"));
  if (!j.at("diagnosis").is_null()) r.diagnosis = decode_mountain_pass(j.at("diagnosis"));
  return r;
}

}  // namespace fninv::json
