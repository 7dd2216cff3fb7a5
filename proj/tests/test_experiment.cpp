#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "descent/experiment.hpp"
#include "descent/json_io.hpp"

using namespace descent;

TEST_CASE("sample_uniform is a pure function of (seed, trial)") {
  const BoxDomain box({{-1.0, 1.0}, {-2.0, 2.0}});
  const Vector a = sample_uniform(box, 17, 12345);
  const Vector b = sample_uniform(box, 17, 12345);
  CHECK(a == b);
  CHECK(sample_uniform(box, 18, 12345) != a);
  CHECK(sample_uniform(box, 17, 12346) != a);
}

TEST_CASE("sample_uniform stays strictly inside and has uniform means") {
  const BoxDomain unit({{0.0, 1.0}});
  const int samples = 100000;
  double mean = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vector p = sample_uniform(unit, i, 777);
    REQUIRE(p[0] > 0.0);
    REQUIRE(p[0] < 1.0);
    mean += p[0];
  }
  mean /= samples;
  const double sigma = 1.0 / std::sqrt(12.0 * samples);
  CHECK(std::abs(mean - 0.5) <= 3.0 * sigma);

  const BoxDomain box({{-1.0, 1.0}, {-2.0, 2.0}});
  for (int i = 0; i < 1000; ++i) REQUIRE(box.contains_open(sample_uniform(box, i, 3)));
}

TEST_CASE("match_limit: nearest point, line distance, tie break") {
  const std::vector<KnownCriticalPoint> wells = {
      {{0.0, 1.0}, std::nullopt, "(0,1)"}, {{0.0, -1.0}, std::nullopt, "(0,-1)"}};
  CHECK(match_limit(Vector{1e-9, 1.0 - 1e-9}, wells, 1e-3) == 0);
  CHECK(match_limit(Vector{0.0, -0.9995}, wells, 1e-3) == 1);
  CHECK_FALSE(match_limit(Vector{0.5, 0.0}, wells, 1e-3).has_value());

  const std::vector<KnownCriticalPoint> line = {
      {{0.5, 0.0, 1.0}, Vector{0.0, 1.0, -1.0}, "line"}};
  CHECK(match_limit(Vector{0.5, 0.3, 0.7}, line, 1e-6) == 0);
  CHECK_FALSE(match_limit(Vector{0.5 + 1e-3, 0.3, 0.7}, line, 1e-6).has_value());

  // equidistant at exactly the radius: lower index wins
  const std::vector<KnownCriticalPoint> pair = {
      {{-1.0}, std::nullopt, "left"}, {{1.0}, std::nullopt, "right"}};
  CHECK(match_limit(Vector{0.0}, pair, 1.0) == 0);

  const std::vector<KnownCriticalPoint> degenerate = {
      {{0.0, 0.0}, Vector{0.0, 0.0}, "zero direction"}};
  CHECK_THROWS_AS(match_limit(Vector{0.0, 0.0}, degenerate, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(match_limit(Vector{0.0}, pair, 0.0), std::invalid_argument);
}

TEST_CASE("quadratic bowl: every trial converges to the origin") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "quadratic-bowl";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-1.0, 1.0}});
  cfg.alpha = 0.5;
  cfg.trials = 100;
  cfg.master_seed = 42;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.converged == 100);
  CHECK(rep.class_local_min == 100);
  CHECK(rep.saddle_hit_fraction == 0.0);
  REQUIRE(rep.basin_counts.size() == 1);
  CHECK(rep.basin_counts[0] == 100);
  CHECK(rep.unmatched_converged == 0);
}

TEST_CASE("double-well basins split between the two minima") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha = 1.0 / 12.0;
  cfg.trials = 500;
  cfg.master_seed = 2026;
  cfg.invariance_certified = true;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.converged == 500);
  CHECK(rep.saddle_hit_fraction == 0.0);
  REQUIRE(rep.basin_counts.size() == 3);
  CHECK(rep.basin_counts[0] + rep.basin_counts[1] == 500);
  CHECK(rep.basin_counts[2] == 0);  // nobody lands on the saddle
  CHECK(rep.basin_counts[0] > 150);
  CHECK(rep.basin_counts[1] > 150);
}

TEST_CASE("saddle-line field: trials diverge, none converge") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "line-of-saddles";
  cfg.domain = BoxDomain({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}});
  cfg.alpha = 0.1;
  cfg.trials = 100;
  cfg.master_seed = 7;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.converged == 0);
  CHECK(rep.diverged >= 99);
  CHECK(rep.saddle_hit_fraction == 0.0);
}

TEST_CASE("counts always sum to the number of trials") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha = 0.3;  // above 2/gamma... not certified; mixed outcomes are fine
  cfg.trials = 200;
  cfg.master_seed = 11;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.converged + rep.diverged + rep.exited_domain + rep.cycling +
            rep.budget_exhausted ==
        cfg.trials);
  CHECK(rep.class_local_min + rep.class_strict_saddle + rep.class_degenerate +
            rep.class_not_critical + rep.class_unclassified ==
        cfg.trials);
  std::size_t basin_total = rep.unmatched_converged;
  for (std::size_t c : rep.basin_counts) basin_total += c;
  CHECK(basin_total == rep.converged);
}

TEST_CASE("alpha auto derives the step from the estimated Hessian sup") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha_auto = true;
  cfg.auto_margin = 11.0 / 12.0;
  cfg.auto_grid = {41, 81};
  cfg.trials = 50;
  cfg.master_seed = 5;
  cfg.invariance_certified = true;
  const ExperimentReport rep = run_experiment(cfg);
  REQUIRE(rep.l_estimate.has_value());
  CHECK(*rep.l_estimate == 11.0);
  CHECK(std::abs(rep.resolved_alpha - 1.0 / 12.0) <= 1e-15);
  CHECK(rep.converged == 50);
}

TEST_CASE("reports are deterministic and schedule-independent") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha = 1.0 / 12.0;
  cfg.trials = 300;
  cfg.master_seed = 99;
  cfg.invariance_certified = true;

  cfg.threads = 1;
  const json serial = to_json(run_experiment(cfg));
  const json serial2 = to_json(run_experiment(cfg));
  cfg.threads = 4;
  const json parallel = to_json(run_experiment(cfg));

  CHECK(reports_equal_modulo_wall_clock(serial, serial2));
  CHECK(reports_equal_modulo_wall_clock(serial, parallel));
}

TEST_CASE("domain exit detection is opt-in and forced off when certified") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "line-of-saddles";
  cfg.domain = BoxDomain({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}});
  cfg.alpha = 0.1;
  cfg.trials = 50;
  cfg.master_seed = 13;

  cfg.domain_exit_detection = true;
  const ExperimentReport exiting = run_experiment(cfg);
  CHECK(exiting.exited_domain >= 45);  // trajectories leave the unit box early

  cfg.domain_exit_detection = false;
  const ExperimentReport divergent = run_experiment(cfg);
  CHECK(divergent.exited_domain == 0);
  CHECK(divergent.diverged >= 49);
}

TEST_CASE("config validation produces field-level errors") {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha = 0.1;
  cfg.trials = 0;
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

  cfg.trials = 10;
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

  cfg.alpha = 0.1;
  cfg.domain = BoxDomain({{0.0, 1.0}});
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.field.builtin_name = "no-such-builtin";
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("per-trial evaluation blowups are recorded, not fatal") {
  ExperimentConfig cfg;
  cfg.field.expression = "exp(x^2)";
  cfg.field.variables = {"x"};
  cfg.domain = BoxDomain({{30.0, 40.0}});
  cfg.alpha = 1.0;
  cfg.trials = 20;
  cfg.master_seed = 3;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.diverged == 20);
  CHECK(rep.diverged_nonfinite == 20);
}
