#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "descent/analysis.hpp"
#include "descent/box.hpp"
#include "descent/dynamics.hpp"
#include "descent/experiment.hpp"
#include "descent/version.hpp"

namespace descent {

using json = nlohmann::json;

namespace detail {

// Non-finite doubles have no JSON representation; emit them as strings so
// reports stay parseable and deterministic.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline json json_vector(const Vector& v) {
  json a = json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
  Vector v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(what + ": expected an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

inline std::uint64_t uint_from_json(const json& j, const std::string& what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError(what + ": expected a non-negative integer");
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline json to_json(const CriticalPointRecord& rec) {
  return json{{"schema_version", report_schema_version},
              {"kind", "critical-point"},
              {"location", detail::json_vector(rec.location)},
              {"gradient_norm", detail::json_number(rec.gradient_norm)},
              {"lambda_min", detail::json_number(rec.lambda_min)},
              {"lambda_max", detail::json_number(rec.lambda_max)},
              {"eig_tolerance", detail::json_number(rec.eig_tolerance)},
              {"class", to_string(rec.cls)}};
}

inline json to_json(const StepSizePlan& plan) {
  json j{{"schema_version", report_schema_version},
         {"kind", "stepsize-plan"},
         {"l_estimate", detail::json_number(plan.l_estimate)},
         {"margin", detail::json_number(plan.margin)},
         {"alpha_sufficient", detail::json_number(plan.alpha_sufficient)}};
  j["gamma"] = plan.gamma ? detail::json_number(*plan.gamma) : json();
  j["alpha_necessary_sup"] =
      plan.alpha_necessary_sup ? detail::json_number(*plan.alpha_necessary_sup) : json();
  return j;
}

inline json to_json(const LipschitzReport& rep) {
  json violations = json::array();
  for (const auto& v : rep.violations)
    violations.push_back(json{{"x", detail::json_vector(v.x)},
                              {"y", detail::json_vector(v.y)},
                              {"ratio", detail::json_number(v.ratio)}});
  json j{{"schema_version", report_schema_version},
         {"kind", "lipschitz-report"},
         {"l", detail::json_number(rep.l)},
         {"pairs_requested", rep.pairs_requested},
         {"pairs_tested", rep.pairs_tested},
         {"pairs_skipped", rep.pairs_skipped},
         {"violation_count", rep.violation_count},
         {"violations", violations},
         {"worst_ratio", detail::json_number(rep.worst_ratio)},
         {"passed", rep.passed}};
  if (!rep.worst_x.empty()) {
    j["worst_pair"] = json{{"x", detail::json_vector(rep.worst_x)},
                           {"y", detail::json_vector(rep.worst_y)}};
  } else {
    j["worst_pair"] = json();
  }
  return j;
}

inline json to_json(const DiffeoReport& rep) {
  json j{{"schema_version", report_schema_version},
         {"kind", "diffeo-report"},
         {"alpha", detail::json_number(rep.alpha)},
         {"points_checked", rep.points_checked},
         {"eigen_failures", rep.eigen_failures},
         {"worst_abs_alpha_eig", detail::json_number(rep.worst_abs_alpha_eig)},
         {"pairs_checked", rep.pairs_checked},
         {"pairs_skipped", rep.pairs_skipped},
         {"collisions", rep.collisions},
         {"min_separation_ratio", detail::json_number(rep.min_separation_ratio)},
         {"eigen_ok", rep.eigen_ok},
         {"injective_ok", rep.injective_ok},
         {"passed", rep.passed}};
  j["first_eigen_failure"] =
      rep.first_eigen_failure ? detail::json_vector(*rep.first_eigen_failure) : json();
  j["first_collision"] =
      rep.first_collision
          ? json{{"x", detail::json_vector(rep.first_collision->first)},
                 {"y", detail::json_vector(rep.first_collision->second)}}
          : json();
  return j;
}

inline json to_json(const InvarianceVerdict& verdict) {
  json bounds = json::array();
  for (const auto& b : verdict.axis_bounds)
    bounds.push_back(json{{"observed_lo", detail::json_number(b.observed_lo)},
                          {"observed_hi", detail::json_number(b.observed_hi)},
                          {"derivative_bound", detail::json_number(b.derivative_bound)},
                          {"error_term", detail::json_number(b.error_term)},
                          {"bounded_lo", detail::json_number(b.bounded_lo)},
                          {"bounded_hi", detail::json_number(b.bounded_hi)},
                          {"margin", detail::json_number(b.margin)}});
  json j{{"schema_version", report_schema_version},
         {"kind", "invariance-verdict"},
         {"verdict", to_string(verdict.kind)},
         {"worst_margin", detail::json_number(verdict.worst_margin)},
         {"axis_bounds", bounds},
         {"samples_checked", verdict.samples_checked},
         {"note", verdict.note}};
  j["witness"] = verdict.witness ? detail::json_vector(*verdict.witness) : json();
  j["image"] = verdict.image ? detail::json_vector(*verdict.image) : json();
  return j;
}

/// Verdict sidecar for a trajectory CSV.
inline json to_json(const Trajectory& traj) {
  json j{{"schema_version", report_schema_version},
         {"kind", "trajectory"},
         {"initial", detail::json_vector(traj.initial)},
         {"termination", to_string(traj.termination)},
         {"iterations", traj.iterations},
         {"recorded_samples", traj.recorded.size()},
         {"final_f", detail::json_number(traj.final_value)},
         {"final_gradnorm", detail::json_number(traj.final_gradient_norm)},
         {"nonfinite", traj.nonfinite},
         {"non_convergent", traj.non_convergent}};
  j["limit"] = traj.limit ? detail::json_vector(*traj.limit) : json();
  j["exit_step"] = traj.exit_step ? json(*traj.exit_step) : json();
  if (traj.cycle) {
    j["cycle"] = json{{"period", 2},
                      {"coordinates", traj.cycle->coordinates},
                      {"first", detail::json_vector(traj.cycle->first)},
                      {"second", detail::json_vector(traj.cycle->second)},
                      {"detected_at", traj.cycle->detected_at}};
  } else {
    j["cycle"] = json();
  }
  return j;
}

inline json known_points_json(const std::vector<KnownCriticalPoint>& pts) {
  json a = json::array();
  for (const auto& kp : pts) {
    json e{{"point", detail::json_vector(kp.point)}, {"label", kp.label}};
    e["direction"] = kp.direction ? detail::json_vector(*kp.direction) : json();
    a.push_back(e);
  }
  return a;
}

inline json to_json(const ExperimentReport& rep) {
  json field;
  if (!rep.field.builtin_name.empty()) {
    field = rep.field.builtin_name;
  } else {
    field = json{{"expression", rep.field.expression}, {"variables", rep.field.variables}};
  }
  json j{{"schema_version", report_schema_version},
         {"kind", "experiment-report"},
         {"config",
          json{{"field", field},
               {"domain", format_box(rep.domain)},
               {"alpha", detail::json_number(rep.resolved_alpha)},
               {"trials", rep.trials},
               {"seed", rep.master_seed},
               {"budget", rep.budget},
               {"matching_radius", detail::json_number(rep.matching_radius)},
               {"known_points", known_points_json(rep.known_points)}}},
         {"l_estimate", rep.l_estimate ? detail::json_number(*rep.l_estimate) : json()},
         {"counts",
          json{{"converged", rep.converged},
               {"diverged", rep.diverged},
               {"diverged_nonfinite", rep.diverged_nonfinite},
               {"exited_domain", rep.exited_domain},
               {"cycling", rep.cycling},
               {"budget_exhausted", rep.budget_exhausted}}},
         {"limit_classes",
          json{{"local_min", rep.class_local_min},
               {"strict_saddle", rep.class_strict_saddle},
               {"degenerate", rep.class_degenerate},
               {"not_critical", rep.class_not_critical},
               {"unclassified", rep.class_unclassified}}},
         {"unmatched_converged", rep.unmatched_converged},
         {"saddle_hit_fraction", detail::json_number(rep.saddle_hit_fraction)},
         {"budget_exhausted_fraction", detail::json_number(rep.budget_exhausted_fraction)},
         {"wall_clock_seconds", detail::json_number(rep.wall_seconds)},
         {"stamp", json{{"seed", rep.master_seed}, {"version", rep.version}}}};
  json basins = json::array();
  for (std::size_t i = 0; i < rep.basin_counts.size(); ++i)
    basins.push_back(json{{"index", i},
                          {"label", rep.known_points[i].label},
                          {"count", rep.basin_counts[i]}});
  j["basins"] = basins;
  return j;
}

/// Per-trial CSV: "trial,x0_1..x0_N,verdict,class,match,final_gradnorm".
inline void write_trial_csv(std::ostream& os, const ExperimentReport& rep) {
  const std::size_t n = rep.domain.dimension();
  os << "trial";
  for (std::size_t i = 1; i <= n; ++i) os << ",x0_" << i;
  os << ",verdict,class,match,final_gradnorm\n";
  char buf[64];
  for (const auto& out : rep.outcomes) {
    os << out.index;
    for (double v : out.initial) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      os << buf;
    }
    os << ',' << to_string(out.termination) << ',';
    if (out.limit) os << to_string(out.limit->cls);
    os << ',';
    if (out.matched) os << *out.matched;
    std::snprintf(buf, sizeof(buf), ",%.17g", out.final_gradient_norm);
    os << buf << "\n";
  }
}

/// Two reports are byte-identical modulo the wall-clock field.
inline bool reports_equal_modulo_wall_clock(const json& a, const json& b) {
  json ca = a, cb = b;
  ca.erase("wall_clock_seconds");
  cb.erase("wall_clock_seconds");
  return ca.dump() == cb.dump();
}

// ---------------------------------------------------------------------------
// Experiment / run configuration files
// ---------------------------------------------------------------------------

/// A parsed configuration file: the experiment plus optional output paths,
/// resolved relative to the config file's directory.
struct RunConfig {
  ExperimentConfig experiment;
  std::optional<std::string> report_path;
  std::optional<std::string> trial_csv_path;
};

inline RunConfig parse_run_config(const json& j,
                                  const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  detail::reject_unknown_keys(
      j,
      {"schema_version", "field", "domain", "alpha", "margin", "l_grid",
       "l_refine_rounds", "trials", "seed", "budget", "tolerances",
       "known_points", "matching_radius", "invariance_certified",
       "domain_exit_detection", "threads", "out", "trial_csv"},
      "config");

  RunConfig run;
  ExperimentConfig& cfg = run.experiment;

  if (!j.contains("field")) throw ConfigError("config: 'field' is required");
  const json& f = j.at("field");
  if (f.is_string()) {
    const std::string name = f.get<std::string>();
    if (!is_builtin(name))
      throw ConfigError("field: unknown builtin '" + name + "'");
    cfg.field.builtin_name = name;
  } else if (f.is_object()) {
    detail::reject_unknown_keys(f, {"expression", "variables"}, "field");
    if (!f.contains("expression") || !f.at("expression").is_string())
      throw ConfigError("field: 'expression' (string) is required");
    if (!f.contains("variables") || !f.at("variables").is_array())
      throw ConfigError("field: 'variables' (array of names) is required");
    cfg.field.expression = f.at("expression").get<std::string>();
    for (const auto& v : f.at("variables")) {
      if (!v.is_string()) throw ConfigError("field: variable names must be strings");
      cfg.field.variables.push_back(v.get<std::string>());
    }
  } else {
    throw ConfigError("field: expected a builtin name or {expression, variables}");
  }

  if (!j.contains("domain")) throw ConfigError("config: 'domain' is required");
  if (!j.at("domain").is_string())
    throw ConfigError("domain: expected box syntax \"(a,b)x(c,d)\"");
  try {
    cfg.domain = parse_box(j.at("domain").get<std::string>());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }

  if (!j.contains("alpha")) throw ConfigError("config: 'alpha' is required");
  const json& a = j.at("alpha");
  if (a.is_string()) {
    if (a.get<std::string>() != "auto")
      throw ConfigError("alpha: expected a number or \"auto\"");
    cfg.alpha_auto = true;
  } else if (a.is_number()) {
    cfg.alpha = a.get<double>();
  } else {
    throw ConfigError("alpha: expected a number or \"auto\"");
  }
  if (j.contains("margin")) {
    if (!j.at("margin").is_number()) throw ConfigError("margin: expected a number");
    cfg.auto_margin = j.at("margin").get<double>();
  }
  if (j.contains("l_grid")) {
    if (!j.at("l_grid").is_array()) throw ConfigError("l_grid: expected an array of counts");
    for (const auto& c : j.at("l_grid"))
      cfg.auto_grid.push_back(detail::uint_from_json(c, "l_grid"));
  }
  if (j.contains("l_refine_rounds"))
    cfg.auto_refine_rounds = detail::uint_from_json(j.at("l_refine_rounds"), "l_refine_rounds");

  if (!j.contains("trials"))
    throw ConfigError("config: 'trials' (positive integer) is required");
  cfg.trials = detail::uint_from_json(j.at("trials"), "trials");
  if (!j.contains("seed"))
    throw ConfigError("config: 'seed' (unsigned integer) is required");
  cfg.master_seed = detail::uint_from_json(j.at("seed"), "seed");
  if (j.contains("budget"))
    cfg.iterate.budget = detail::uint_from_json(j.at("budget"), "budget");

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    if (!t.is_object()) throw ConfigError("tolerances: expected an object");
    detail::reject_unknown_keys(t,
                                {"grad", "step", "divergence_radius", "divergence_value",
                                 "cycle", "cycle_window", "record_stride"},
                                "tolerances");
    auto num = [&](const char* key, double& slot) {
      if (t.contains(key)) {
        if (!t.at(key).is_number()) throw ConfigError(std::string("tolerances.") + key + ": expected a number");
        slot = t.at(key).get<double>();
      }
    };
    num("grad", cfg.iterate.grad_tolerance);
    num("step", cfg.iterate.step_tolerance);
    num("divergence_radius", cfg.iterate.divergence_radius);
    num("divergence_value", cfg.iterate.divergence_value);
    num("cycle", cfg.iterate.cycle_tolerance);
    if (t.contains("cycle_window"))
      cfg.iterate.cycle_window =
          detail::uint_from_json(t.at("cycle_window"), "tolerances.cycle_window");
    if (t.contains("record_stride"))
      cfg.iterate.record_stride =
          detail::uint_from_json(t.at("record_stride"), "tolerances.record_stride");
    cfg.classify.grad_tolerance = cfg.iterate.grad_tolerance;
  }

  if (j.contains("known_points")) {
    if (!j.at("known_points").is_array())
      throw ConfigError("known_points: expected an array");
    std::vector<KnownCriticalPoint> pts;
    for (const auto& e : j.at("known_points")) {
      if (!e.is_object()) throw ConfigError("known_points: expected objects");
      detail::reject_unknown_keys(e, {"point", "direction", "label"}, "known_points");
      KnownCriticalPoint kp;
      if (!e.contains("point")) throw ConfigError("known_points: 'point' is required");
      kp.point = detail::vector_from_json(e.at("point"), "known_points.point");
      if (e.contains("direction") && !e.at("direction").is_null())
        kp.direction = detail::vector_from_json(e.at("direction"), "known_points.direction");
      if (e.contains("label")) {
        if (!e.at("label").is_string()) throw ConfigError("known_points.label: expected a string");
        kp.label = e.at("label").get<std::string>();
      }
      pts.push_back(std::move(kp));
    }
    cfg.known_points = std::move(pts);
  }

  if (j.contains("matching_radius")) {
    if (!j.at("matching_radius").is_number())
      throw ConfigError("matching_radius: expected a number");
    cfg.matching_radius = j.at("matching_radius").get<double>();
  }
  auto flag = [&](const char* key, bool& slot) {
    if (j.contains(key)) {
      if (!j.at(key).is_boolean()) throw ConfigError(std::string(key) + ": expected true or false");
      slot = j.at(key).get<bool>();
    }
  };
  flag("invariance_certified", cfg.invariance_certified);
  flag("domain_exit_detection", cfg.domain_exit_detection);
  if (j.contains("threads"))
    cfg.threads = detail::uint_from_json(j.at("threads"), "threads");

  auto path = [&](const char* key, std::optional<std::string>& slot) {
    if (j.contains(key)) {
      if (!j.at(key).is_string()) throw ConfigError(std::string(key) + ": expected a path string");
      std::filesystem::path p = j.at(key).get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      slot = p.string();
    }
  };
  path("out", run.report_path);
  path("trial_csv", run.trial_csv_path);

  return run;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  return parse_run_config(j, file.has_parent_path() ? file.parent_path()
                                                    : std::filesystem::path("."));
}

}  // namespace descent
