// descent: gradient-descent dynamics toolkit.
//
// Subcommands: classify, stepsize, invariance, diffeo, run, experiment,
// selfcheck. Every subcommand is a thin adapter over the library; identical
// results are obtainable through library calls.
//
// Exit codes: 0 success; 1 analysis ran and found a negative result
// (e.g. invariance falsified, diagnostics failed); 2 usage or config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "descent/descent.hpp"

namespace {

using namespace descent;

constexpr int exit_ok = 0;
constexpr int exit_finding = 1;
constexpr int exit_usage = 2;

Vector parse_csv_doubles(const std::string& text) {
  Vector out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  if (out.empty())
    throw ConfigError("expected a comma-separated list of numbers, got '" + text + "'");
  return out;
}

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front())))
      item.erase(item.begin());
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back())))
      item.pop_back();
    out.push_back(item);
  }
  return out;
}

/// --field accepts a builtin name or an expression (which needs --vars).
ScalarField resolve_field(const std::string& field, const std::string& vars_csv,
                          std::size_t dim_hint) {
  if (is_builtin(field)) return builtin(field, dim_hint).field;
  if (vars_csv.empty())
    throw ConfigError("'" + field +
                      "' is not a builtin; pass the variable order, e.g. --vars x,y");
  return build_field(field, VariableOrder(split_names(vars_csv)));
}

void emit(const json& j, bool as_json, const std::string& out_path,
          const std::string& human) {
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw ConfigError("cannot write to " + out_path);
    os << j.dump(2) << "\n";
  }
  if (as_json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << human;
}

std::string format_vector(const Vector& v) {
  std::string s = "(";
  char buf[64];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", v[i]);
    if (i) s += ", ";
    s += buf;
  }
  return s + ")";
}

struct CommonFieldOptions {
  std::string field;
  std::string vars;
  bool as_json = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFieldOptions& opt) {
  cmd->add_option("--field", opt.field,
                  "builtin name (line-of-saddles, double-well, quadratic-bowl) or expression")
      ->required();
  cmd->add_option("--vars", opt.vars, "variable order for expression fields, e.g. x,y");
  cmd->add_flag("--json", opt.as_json, "print the JSON report to stdout");
  cmd->add_option("--out", opt.out, "write the JSON report to a file");
}

int cmd_classify(const CommonFieldOptions& opt, const std::string& point_csv) {
  const Vector point = parse_csv_doubles(point_csv);
  const ScalarField field = resolve_field(opt.field, opt.vars, point.size());
  const CriticalPointRecord rec = classify(field, point);
  std::ostringstream human;
  human << "point        " << format_vector(rec.location) << "\n"
        << "gradient norm " << rec.gradient_norm << "\n"
        << "lambda_min   " << rec.lambda_min << "\n"
        << "lambda_max   " << rec.lambda_max << "\n"
        << "class        " << to_string(rec.cls) << "\n";
  emit(to_json(rec), opt.as_json, opt.out, human.str());
  return exit_ok;
}

int cmd_stepsize(const CommonFieldOptions& opt, const std::string& domain_text,
                 double margin, std::optional<double> gamma, std::size_t grid,
                 std::size_t refine) {
  const BoxDomain domain = parse_box(domain_text);
  const ScalarField field = resolve_field(opt.field, opt.vars, domain.dimension());
  const auto est = estimate_hessian_sup(field, domain,
                                        std::vector<std::size_t>(domain.dimension(), grid),
                                        refine);
  const StepSizePlan plan = plan_stepsize(est.value, margin, gamma);
  json j = to_json(plan);
  j["l_maximizer"] = detail::json_vector(est.maximizer);
  j["l_is_lower_bound"] = est.is_lower_bound;
  std::ostringstream human;
  human << "L estimate (grid lower bound) " << est.value << " at "
        << format_vector(est.maximizer) << "\n"
        << "margin            " << margin << "\n"
        << "alpha_sufficient  " << plan.alpha_sufficient << "  (margin/L)\n";
  if (plan.alpha_necessary_sup)
    human << "alpha_necessary_sup " << *plan.alpha_necessary_sup << "  (2/gamma)\n";
  emit(j, opt.as_json, opt.out, human.str());
  return exit_ok;
}

int cmd_invariance(const CommonFieldOptions& opt, const std::string& domain_text,
                   double alpha, bool certify, std::size_t density,
                   std::uint64_t seed) {
  const BoxDomain domain = parse_box(domain_text);
  const ScalarField field = resolve_field(opt.field, opt.vars, domain.dimension());
  const GDMap map(field, alpha);
  const InvarianceVerdict verdict = check_forward_invariance(
      map, domain,
      certify ? InvarianceMode::SeparableCertify : InvarianceMode::Sample, density,
      seed);
  std::ostringstream human;
  human << "verdict " << to_string(verdict.kind) << "\n";
  if (verdict.kind == InvarianceKind::FalsifiedAt) {
    human << "witness " << format_vector(*verdict.witness) << " maps to "
          << format_vector(*verdict.image) << "\n";
  } else {
    human << "worst margin " << verdict.worst_margin << "\n";
    for (std::size_t a = 0; a < verdict.axis_bounds.size(); ++a) {
      const auto& b = verdict.axis_bounds[a];
      human << "axis " << a + 1 << ": image range [" << b.observed_lo << ", "
            << b.observed_hi << "] +- " << b.error_term << ", margin " << b.margin
            << "\n";
    }
  }
  emit(to_json(verdict), opt.as_json, opt.out, human.str());
  return verdict.kind == InvarianceKind::FalsifiedAt ? exit_finding : exit_ok;
}

int cmd_diffeo(const CommonFieldOptions& opt, const std::string& domain_text,
               double alpha, std::size_t points, std::size_t pairs,
               std::uint64_t seed) {
  const BoxDomain domain = parse_box(domain_text);
  const ScalarField field = resolve_field(opt.field, opt.vars, domain.dimension());
  const DiffeoReport rep = check_diffeomorphism(field, alpha, domain, points, pairs, seed);
  std::ostringstream human;
  human << "eigenvalue check " << (rep.eigen_ok ? "pass" : "FAIL") << " ("
        << rep.eigen_failures << "/" << rep.points_checked
        << " failures, worst |alpha*lambda| = " << rep.worst_abs_alpha_eig << ")\n"
        << "injectivity check " << (rep.injective_ok ? "pass" : "FAIL") << " ("
        << rep.collisions << "/" << rep.pairs_checked << " collisions)\n"
        << "overall " << (rep.passed ? "pass" : "FAIL") << "\n";
  emit(to_json(rep), opt.as_json, opt.out, human.str());
  return rep.passed ? exit_ok : exit_finding;
}

int cmd_run(const CommonFieldOptions& opt, double alpha, const std::string& x0_csv,
            const std::string& domain_text, std::size_t budget,
            const std::string& traj_out) {
  const Vector x0 = parse_csv_doubles(x0_csv);
  const ScalarField field = resolve_field(opt.field, opt.vars, x0.size());
  std::optional<BoxDomain> domain;
  if (!domain_text.empty()) domain = parse_box(domain_text);
  const GDMap map(field, alpha);
  IterateOptions iter;
  iter.budget = budget;
  const Trajectory traj = iterate(map, x0, domain, iter);

  if (!traj_out.empty()) {
    std::ofstream os(traj_out);
    if (!os) throw ConfigError("cannot write to " + traj_out);
    write_trajectory_csv(os, traj, field.dimension());
    std::ofstream sidecar(traj_out + ".json");
    if (!sidecar) throw ConfigError("cannot write to " + traj_out + ".json");
    sidecar << to_json(traj).dump(2) << "\n";
  }

  std::ostringstream human;
  human << "termination " << to_string(traj.termination) << " after "
        << traj.iterations << " iterations\n";
  if (traj.limit) human << "limit " << format_vector(*traj.limit) << "\n";
  if (traj.cycle) {
    human << "cycling coordinates:";
    for (std::size_t c : traj.cycle->coordinates) human << " x" << c + 1;
    human << "  (" << format_vector(traj.cycle->first) << " <-> "
          << format_vector(traj.cycle->second) << ")\n";
  }
  human << "final f " << traj.final_value << ", final |grad| "
        << traj.final_gradient_norm << "\n";
  emit(to_json(traj), opt.as_json, "", human.str());
  return exit_ok;
}

int cmd_experiment(const std::string& config_path, const std::string& out_override,
                   const std::string& csv_override, std::size_t threads_override,
                   bool as_json) {
  RunConfig run = load_run_config(config_path);
  if (!out_override.empty()) run.report_path = out_override;
  if (!csv_override.empty()) run.trial_csv_path = csv_override;
  if (threads_override > 0) run.experiment.threads = threads_override;

  const ExperimentReport rep = run_experiment(run.experiment);
  const json j = to_json(rep);

  if (run.report_path) {
    std::ofstream os(*run.report_path);
    if (!os) throw ConfigError("cannot write to " + *run.report_path);
    os << j.dump(2) << "\n";
  }
  if (run.trial_csv_path) {
    std::ofstream os(*run.trial_csv_path);
    if (!os) throw ConfigError("cannot write to " + *run.trial_csv_path);
    write_trial_csv(os, rep);
  }

  if (as_json || !run.report_path) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "trials " << rep.trials << ", alpha " << rep.resolved_alpha << "\n"
              << "converged " << rep.converged << ", diverged " << rep.diverged
              << ", exited " << rep.exited_domain << ", cycling " << rep.cycling
              << ", budget_exhausted " << rep.budget_exhausted << "\n"
              << "saddle_hit_fraction " << rep.saddle_hit_fraction << "\n";
    for (std::size_t i = 0; i < rep.basin_counts.size(); ++i)
      std::cout << "basin " << rep.known_points[i].label << ": " << rep.basin_counts[i]
                << "\n";
    std::cout << "report written to " << *run.report_path << "\n";
  }
  return exit_ok;
}

int cmd_selfcheck() {
  bool ok = true;
  auto line = [&](bool pass, const std::string& what) {
    std::cout << (pass ? "[ok]   " : "[FAIL] ") << what << "\n";
    ok = ok && pass;
  };

  SplitMix64 rng = SplitMix64::stream(0xD5CE47, 0);
  for (const auto& name : builtin_names()) {
    const Builtin b = builtin(name);
    std::vector<Vector> points;
    for (int i = 0; i < 1000; ++i) {
      Vector p(b.field.dimension());
      for (std::size_t a = 0; a < p.size(); ++a)
        p[a] = b.reference_domain.lo(a) +
               b.reference_domain.width(a) * rng.next_double_open();
      points.push_back(std::move(p));
    }
    const CheckReport rep = fd_check(b.field, points, 1e-6, 1e-4);
    std::ostringstream what;
    what << name << ": fd_check over 1000 points (grad err " << rep.max_gradient_error
         << ", hess err " << rep.max_hessian_error << ")";
    line(rep.passed && rep.points_checked == 1000, what.str());
  }

  std::size_t eig_failures = 0;
  double worst_recon = 0.0, worst_orth = 0.0, worst_trace = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_below(10);
    SymmetricMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        a.set(i, j, 10.0 * (2.0 * rng.next_double_open() - 1.0));
    const SymmetricSpectrum s = eigen_symmetric(a);

    double recon = 0.0, orth = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double vij = 0.0, qq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          vij += s.eigenvector(i, k) * s.eigenvalues[k] * s.eigenvector(j, k);
          qq += s.eigenvector(k, i) * s.eigenvector(k, j);
        }
        recon = std::max(recon, std::abs(vij - a(i, j)));
        orth = std::max(orth, std::abs(qq - (i == j ? 1.0 : 0.0)));
      }
    }
    double eig_sum = 0.0;
    for (double v : s.eigenvalues) eig_sum += v;
    const double trace_err =
        std::abs(eig_sum - a.trace()) / std::max(1.0, std::abs(a.trace()));
    bool sorted = true;
    for (std::size_t k = 1; k < n; ++k)
      sorted = sorted && s.eigenvalues[k - 1] <= s.eigenvalues[k];

    worst_recon = std::max(worst_recon, recon);
    worst_orth = std::max(worst_orth, orth);
    worst_trace = std::max(worst_trace, trace_err);
    if (!(recon <= 1e-10 * std::max(1.0, a.max_abs()) && orth <= 1e-10 &&
          trace_err <= 1e-10 && sorted))
      ++eig_failures;
  }
  {
    std::ostringstream what;
    what << "eigensolver: 1000 random symmetric matrices (recon " << worst_recon
         << ", orth " << worst_orth << ", trace " << worst_trace << ")";
    line(eig_failures == 0, what.str());
  }

  std::cout << (ok ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return ok ? exit_ok : exit_finding;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-descent dynamics: classification, step-size bounds, "
               "invariance certification, Monte Carlo basin experiments"};
  app.require_subcommand(1);

  // classify
  CommonFieldOptions classify_opt;
  std::string classify_point;
  CLI::App* classify_cmd = app.add_subcommand("classify", "classify a critical point");
  add_common(classify_cmd, classify_opt);
  classify_cmd->add_option("--point", classify_point, "point, e.g. 0.5,0.25,0.75")->required();

  // stepsize
  CommonFieldOptions stepsize_opt;
  std::string stepsize_domain;
  double stepsize_margin = 0.9;
  double stepsize_gamma = 0.0;
  std::size_t stepsize_grid = 41;
  std::size_t stepsize_refine = 3;
  CLI::App* stepsize_cmd =
      app.add_subcommand("stepsize", "estimate L over a box and plan the step size");
  add_common(stepsize_cmd, stepsize_opt);
  stepsize_cmd->add_option("--domain", stepsize_domain, "box, e.g. \"(-1,1)x(-2,2)\"")
      ->required();
  stepsize_cmd->add_option("--margin", stepsize_margin, "alpha = margin/L, margin in (0,1)");
  stepsize_cmd->add_option("--gamma", stepsize_gamma,
                           "lower bound on |Hessian| over minima for the necessary bound");
  stepsize_cmd->add_option("--grid", stepsize_grid, "grid points per axis");
  stepsize_cmd->add_option("--refine", stepsize_refine, "local refinement rounds");

  // invariance
  CommonFieldOptions inv_opt;
  std::string inv_domain;
  double inv_alpha = 0.0;
  bool inv_certify = false;
  std::size_t inv_density = 0;
  std::uint64_t inv_seed = 0;
  CLI::App* inv_cmd =
      app.add_subcommand("invariance", "test or certify forward invariance of a box");
  add_common(inv_cmd, inv_opt);
  inv_cmd->add_option("--domain", inv_domain, "box")->required();
  inv_cmd->add_option("--alpha", inv_alpha, "step size")->required();
  inv_cmd->add_flag("--certify", inv_certify,
                    "separable certification (default: sampling falsification)");
  inv_cmd->add_option("--density", inv_density,
                      "samples (sample mode) or grid points per axis (certify)");
  inv_cmd->add_option("--seed", inv_seed, "sampling seed");

  // diffeo
  CommonFieldOptions diffeo_opt;
  std::string diffeo_domain;
  double diffeo_alpha = 0.0;
  std::size_t diffeo_points = 10000, diffeo_pairs = 10000;
  std::uint64_t diffeo_seed = 0;
  CLI::App* diffeo_cmd = app.add_subcommand(
      "diffeo", "diffeomorphism diagnostics: Jacobian spectrum and injectivity");
  add_common(diffeo_cmd, diffeo_opt);
  diffeo_cmd->add_option("--domain", diffeo_domain, "box")->required();
  diffeo_cmd->add_option("--alpha", diffeo_alpha, "step size")->required();
  diffeo_cmd->add_option("--points", diffeo_points, "points for the eigenvalue check");
  diffeo_cmd->add_option("--pairs", diffeo_pairs, "pairs for the injectivity check");
  diffeo_cmd->add_option("--seed", diffeo_seed, "sampling seed");

  // run
  CommonFieldOptions run_opt;
  double run_alpha = 0.0;
  std::string run_x0, run_domain, run_traj_out;
  std::size_t run_budget = 100000;
  CLI::App* run_cmd = app.add_subcommand("run", "iterate a single trajectory");
  run_cmd->add_option("--field", run_opt.field,
                      "builtin name (line-of-saddles, double-well, quadratic-bowl) or expression")
      ->required();
  run_cmd->add_option("--vars", run_opt.vars, "variable order for expression fields, e.g. x,y");
  run_cmd->add_flag("--json", run_opt.as_json, "print the verdict JSON to stdout");
  run_cmd->add_option("--alpha", run_alpha, "step size")->required();
  run_cmd->add_option("--x0", run_x0, "initial point, e.g. 0.3,0.1")->required();
  run_cmd->add_option("--domain", run_domain, "optional box for exit detection");
  run_cmd->add_option("--budget", run_budget, "iteration budget");
  run_cmd->add_option("--out", run_traj_out,
                      "write the trajectory CSV here (verdict sidecar: <path>.json)");

  // experiment
  std::string exp_config, exp_out, exp_csv;
  std::size_t exp_threads = 0;
  bool exp_json = false;
  CLI::App* exp_cmd =
      app.add_subcommand("experiment", "seeded Monte Carlo basin experiment");
  exp_cmd->add_option("--config", exp_config, "JSON config file")->required();
  exp_cmd->add_option("--out", exp_out, "report path (overrides the config)");
  exp_cmd->add_option("--trial-csv", exp_csv, "per-trial CSV path (overrides the config)");
  exp_cmd->add_option("--threads", exp_threads, "worker threads (overrides the config)");
  exp_cmd->add_flag("--json", exp_json, "print the report JSON to stdout");

  // selfcheck
  app.add_subcommand("selfcheck",
                     "run the finite-difference and eigensolver oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n"
              << "usage error; run 'descent --help' or 'descent <command> --help'\n";
    return exit_usage;
  }

  try {
    if (classify_cmd->parsed()) return cmd_classify(classify_opt, classify_point);
    if (stepsize_cmd->parsed())
      return cmd_stepsize(stepsize_opt, stepsize_domain, stepsize_margin,
                          stepsize_gamma > 0.0 ? std::optional<double>(stepsize_gamma)
                                               : std::nullopt,
                          stepsize_grid, stepsize_refine);
    if (inv_cmd->parsed()) {
      if (inv_density == 0) inv_density = inv_certify ? 100001 : 100000;
      return cmd_invariance(inv_opt, inv_domain, inv_alpha, inv_certify, inv_density,
                            inv_seed);
    }
    if (diffeo_cmd->parsed())
      return cmd_diffeo(diffeo_opt, diffeo_domain, diffeo_alpha, diffeo_points,
                        diffeo_pairs, diffeo_seed);
    if (run_cmd->parsed())
      return cmd_run(run_opt, run_alpha, run_x0, run_domain, run_budget, run_traj_out);
    if (exp_cmd->parsed())
      return cmd_experiment(exp_config, exp_out, exp_csv, exp_threads, exp_json);
    return cmd_selfcheck();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return exit_usage;
  } catch (const Error& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return exit_finding;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_finding;
  }
}
