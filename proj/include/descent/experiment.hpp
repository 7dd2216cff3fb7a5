#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "descent/analysis.hpp"
#include "descent/box.hpp"
#include "descent/dynamics.hpp"
#include "descent/field.hpp"
#include "descent/rng.hpp"
#include "descent/version.hpp"

namespace descent {

/// Uniform draw over the open box; the stream is a pure function of
/// (master_seed, trial_index), so trials reproduce under any schedule.
inline Vector sample_uniform(const BoxDomain& domain, std::uint64_t trial_index,
                             std::uint64_t master_seed) {
  SplitMix64 rng = SplitMix64::stream(master_seed, trial_index);
  return detail::uniform_in_box(domain, rng);
}

/// Index of the nearest known critical point within radius; line entries
/// use point-to-line distance. Ties at equal distance keep the lower index.
inline std::optional<std::size_t> match_limit(const Vector& limit,
                                              const std::vector<KnownCriticalPoint>& known,
                                              double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("match_limit: radius must be positive");
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < known.size(); ++i) {
    double d;
    if (known[i].direction) {
      const Vector& p = known[i].point;
      const Vector& dir = *known[i].direction;
      const double dn2 = dot(dir, dir);
      if (!(dn2 > 0.0))
        throw std::invalid_argument("match_limit: zero-length line direction");
      double proj = 0.0;
      for (std::size_t a = 0; a < limit.size(); ++a) proj += (limit[a] - p[a]) * dir[a];
      proj /= dn2;
      double s = 0.0;
      for (std::size_t a = 0; a < limit.size(); ++a) {
        const double r = limit[a] - p[a] - proj * dir[a];
        s += r * r;
      }
      d = std::sqrt(s);
    } else {
      d = distance(limit, known[i].point);
    }
    if (d <= radius && d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

/// How the cost function of an experiment is specified.
struct FieldSpec {
  std::string builtin_name;           // nonempty -> builtin lookup
  std::string expression;             // otherwise parsed with `variables`
  std::vector<std::string> variables;
};

struct ExperimentConfig {
  FieldSpec field;
  BoxDomain domain{{{0.0, 1.0}}};
  double alpha = 0.0;        // used when alpha_auto is false
  bool alpha_auto = false;   // alpha = auto_margin / estimated L over domain
  double auto_margin = 0.9;
  std::vector<std::size_t> auto_grid;  // per-axis counts; empty -> 41 each
  std::size_t auto_refine_rounds = 3;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  IterateOptions iterate;
  ClassifyOptions classify;
  std::optional<std::vector<KnownCriticalPoint>> known_points;  // default: builtin's
  double matching_radius = 1e-4;
  bool invariance_certified = false;  // certified domain: exit detection forced off
  bool domain_exit_detection = false; // pass the domain to iterate for exit checks
  std::size_t threads = 0;            // 0 -> DESCENT_THREADS or hardware
};

struct TrialOutcome {
  std::size_t index = 0;
  Vector initial;
  Termination termination = Termination::BudgetExhausted;
  bool nonfinite = false;
  bool cycling_partial = false;  // cycle certificate covers a strict subset of coordinates
  std::optional<CriticalPointRecord> limit;  // present iff Converged
  std::optional<std::size_t> matched;
  double final_gradient_norm = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
  // config echo
  FieldSpec field;
  BoxDomain domain{{{0.0, 1.0}}};
  double resolved_alpha = 0.0;
  std::optional<double> l_estimate;  // set when alpha was auto
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  std::size_t budget = 0;
  double matching_radius = 0.0;
  std::vector<KnownCriticalPoint> known_points;

  // counts by termination verdict
  std::size_t converged = 0;
  std::size_t diverged = 0;
  std::size_t diverged_nonfinite = 0;  // subset of diverged
  std::size_t exited_domain = 0;
  std::size_t cycling = 0;
  std::size_t budget_exhausted = 0;

  // counts by limit class (non-converged trials are "unclassified")
  std::size_t class_local_min = 0;
  std::size_t class_strict_saddle = 0;
  std::size_t class_degenerate = 0;
  std::size_t class_not_critical = 0;
  std::size_t class_unclassified = 0;

  std::vector<std::size_t> basin_counts;  // aligned with known_points
  std::size_t unmatched_converged = 0;

  double saddle_hit_fraction = 0.0;
  double budget_exhausted_fraction = 0.0;

  std::vector<TrialOutcome> outcomes;  // trial-index order

  double wall_seconds = 0.0;
  std::string version = version_string;
};

namespace detail {

inline std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DESCENT_THREADS")) {
    const long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

inline ScalarField resolve_field(const FieldSpec& spec, std::size_t dim_hint) {
  if (!spec.builtin_name.empty()) return builtin(spec.builtin_name, dim_hint).field;
  if (spec.expression.empty())
    throw ConfigError("field: either a builtin name or an expression is required");
  try {
    return build_field(spec.expression, VariableOrder(spec.variables));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("field expression: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field variables: ") + e.what());
  }
}

}  // namespace detail

/// Runs the Monte Carlo experiment: sample, iterate, polish and classify
/// converged limits, match to known critical points, aggregate. The report
/// is a deterministic function of the config (wall clock aside), independent
/// of the execution schedule.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();

  if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
  if (!(cfg.matching_radius > 0.0)) throw ConfigError("matching_radius: must be positive");

  const ScalarField field = detail::resolve_field(cfg.field, cfg.domain.dimension());
  const std::size_t n = field.dimension();
  if (cfg.domain.dimension() != n)
    throw ConfigError("domain: dimension does not match the field");

  ExperimentReport report;
  report.field = cfg.field;
  report.domain = cfg.domain;
  report.trials = cfg.trials;
  report.master_seed = cfg.master_seed;
  report.budget = cfg.iterate.budget;
  report.matching_radius = cfg.matching_radius;

  double alpha = cfg.alpha;
  if (cfg.alpha_auto) {
    std::vector<std::size_t> grid = cfg.auto_grid;
    if (grid.empty()) grid.assign(n, 41);
    if (grid.size() != n) throw ConfigError("auto_grid: one count per axis required");
    const HessianSupEstimate est =
        estimate_hessian_sup(field, cfg.domain, grid, cfg.auto_refine_rounds);
    report.l_estimate = est.value;
    alpha = plan_stepsize(est.value, cfg.auto_margin).alpha_sufficient;
  } else if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha: must be positive and finite (or auto)");
  }
  report.resolved_alpha = alpha;

  std::vector<KnownCriticalPoint> known;
  if (cfg.known_points) {
    known = *cfg.known_points;
  } else if (!cfg.field.builtin_name.empty()) {
    known = builtin(cfg.field.builtin_name, n).critical_points;
  }
  for (const auto& kp : known) {
    if (kp.point.size() != n || (kp.direction && kp.direction->size() != n))
      throw ConfigError("known_points: dimension mismatch");
    if (kp.direction && !(dot(*kp.direction, *kp.direction) > 0.0))
      throw ConfigError("known_points: line direction must be nonzero");
  }
  report.known_points = known;
  report.basin_counts.assign(known.size(), 0);

  const GDMap map(field, alpha);
  const std::optional<BoxDomain> exit_domain =
      (cfg.domain_exit_detection && !cfg.invariance_certified)
          ? std::optional<BoxDomain>(cfg.domain)
          : std::nullopt;

  IterateOptions iter_opt = cfg.iterate;
  if (iter_opt.record_stride == 0)
    iter_opt.record_stride = std::max<std::size_t>(iter_opt.budget, 1);  // endpoints only

  report.outcomes.resize(cfg.trials);
  auto run_trial = [&](std::size_t i) {
    TrialOutcome out;
    out.index = i;
    out.initial = sample_uniform(cfg.domain, i, cfg.master_seed);
    const Trajectory traj = iterate(map, out.initial, exit_domain, iter_opt);
    out.termination = traj.termination;
    out.nonfinite = traj.nonfinite;
    out.final_gradient_norm = traj.final_gradient_norm;
    if (traj.cycle && traj.cycle->coordinates.size() < n) out.cycling_partial = true;
    if (traj.termination == Termination::Converged) {
      Vector limit = *traj.limit;
      if (auto polished = refine_critical(field, limit, 100, cfg.classify.grad_tolerance))
        limit = *polished;
      out.limit = classify(field, limit, cfg.classify);
      out.matched = match_limit(limit, known, cfg.matching_radius);
    }
    report.outcomes[i] = std::move(out);
  };

  const std::size_t threads =
      std::min<std::size_t>(detail::resolve_thread_count(cfg.threads), cfg.trials);
  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.trials; ++i) run_trial(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.trials; i = next.fetch_add(1))
          run_trial(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const TrialOutcome& out : report.outcomes) {
    switch (out.termination) {
      case Termination::Converged: ++report.converged; break;
      case Termination::Diverged:
        ++report.diverged;
        if (out.nonfinite) ++report.diverged_nonfinite;
        break;
      case Termination::ExitedDomain: ++report.exited_domain; break;
      case Termination::Cycling: ++report.cycling; break;
      case Termination::BudgetExhausted: ++report.budget_exhausted; break;
    }
    if (out.limit) {
      switch (out.limit->cls) {
        case CriticalClass::LocalMin: ++report.class_local_min; break;
        case CriticalClass::StrictSaddle: ++report.class_strict_saddle; break;
        case CriticalClass::Degenerate: ++report.class_degenerate; break;
        case CriticalClass::NotCritical: ++report.class_not_critical; break;
      }
      if (out.matched)
        ++report.basin_counts[*out.matched];
      else
        ++report.unmatched_converged;
    } else {
      ++report.class_unclassified;
    }
  }

  report.saddle_hit_fraction =
      static_cast<double>(report.class_strict_saddle) / static_cast<double>(cfg.trials);
  report.budget_exhausted_fraction =
      static_cast<double>(report.budget_exhausted) / static_cast<double>(cfg.trials);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace descent
