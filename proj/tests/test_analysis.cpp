#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "descent/analysis.hpp"
#include "descent/field.hpp"
#include "descent/rng.hpp"

using namespace descent;

namespace {
const double root8 = 2.0 * std::sqrt(2.0);
}

TEST_CASE("classify: saddle line, wells, bowl, constant") {
  const Builtin saddles = builtin("line-of-saddles");
  const CriticalPointRecord rec = classify(saddles.field, Vector{0.5, 0.25, 0.75});
  CHECK(rec.cls == CriticalClass::StrictSaddle);
  CHECK(std::abs(rec.lambda_min + root8) <= 1e-9);
  CHECK(std::abs(rec.lambda_max - root8) <= 1e-9);

  const Builtin well = builtin("double-well");
  const CriticalPointRecord min_rec = classify(well.field, Vector{0.0, 1.0});
  CHECK(min_rec.cls == CriticalClass::LocalMin);
  CHECK(std::abs(min_rec.lambda_min - 1.0) <= 1e-12);
  CHECK(std::abs(min_rec.lambda_max - 2.0) <= 1e-12);

  const CriticalPointRecord saddle_rec = classify(well.field, Vector{0.0, 0.0});
  CHECK(saddle_rec.cls == CriticalClass::StrictSaddle);
  CHECK(std::abs(saddle_rec.lambda_min + 1.0) <= 1e-12);

  const ScalarField flat = build_field("7", VariableOrder({"x", "y"}));
  CHECK(classify(flat, Vector{3.0, -4.0}).cls == CriticalClass::Degenerate);

  CHECK(classify(well.field, Vector{0.5, 0.5}).cls == CriticalClass::NotCritical);
}

TEST_CASE("refine_critical polishes toward the wells and the saddle line") {
  const Builtin well = builtin("double-well");

  SECTION("Newton from a nearby seed lands on (0,1)") {
    const auto polished = refine_critical(well.field, Vector{0.1, 0.9});
    REQUIRE(polished.has_value());
    CHECK(distance(*polished, Vector{0.0, 1.0}) <= 1e-10);
  }

  SECTION("a seed that is already critical comes back unchanged") {
    const auto polished = refine_critical(well.field, Vector{0.0, 1.0});
    REQUIRE(polished.has_value());
    CHECK(*polished == Vector{0.0, 1.0});
  }

  SECTION("singular Hessian falls back to gradient-norm descent onto the line") {
    const Builtin saddles = builtin("line-of-saddles");
    const auto polished = refine_critical(saddles.field, Vector{0.6, 0.2, 0.9});
    REQUIRE(polished.has_value());
    const Vector& p = *polished;
    CHECK(std::abs(p[0] - 0.5) <= 1e-10);
    CHECK(std::abs(p[1] + p[2] - 1.0) <= 1e-10);
    CHECK(norm(saddles.field.gradient(p)) <= 1e-10);
  }

  SECTION("hopeless seeds report failure") {
    // constant-gradient field: no critical point anywhere
    const ScalarField tilt = build_field("x", VariableOrder({"x"}));
    CHECK_FALSE(refine_critical(tilt, Vector{0.0}).has_value());
  }
}

TEST_CASE("estimate_hessian_sup finds the boundary maximum of the double well") {
  const Builtin well = builtin("double-well");
  const auto est = estimate_hessian_sup(well.field, well.reference_domain, {41, 81}, 3);
  CHECK(est.value >= 11.0 - 1e-6);
  CHECK(est.value <= 11.0);
  CHECK(std::abs(std::abs(est.maximizer[1]) - 2.0) <= 1e-12);
}

TEST_CASE("estimate_hessian_sup on constant-Hessian fields") {
  const auto bowl = estimate_hessian_sup(quadratic_bowl_field(2),
                                         BoxDomain({{-3.0, 5.0}, {-1.0, 1.0}}), {5, 5}, 2);
  CHECK(bowl.value == 1.0);

  const Builtin saddles = builtin("line-of-saddles");
  const auto est =
      estimate_hessian_sup(saddles.field, saddles.reference_domain, {4, 4, 4}, 1);
  CHECK(std::abs(est.value - root8) <= 1e-12);
}

TEST_CASE("estimate_hessian_sup validates the grid") {
  const Builtin well = builtin("double-well");
  CHECK_THROWS_AS(estimate_hessian_sup(well.field, well.reference_domain, {1, 10}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_hessian_sup(well.field, well.reference_domain, {10000, 10000}, 0),
                  std::invalid_argument);
}

TEST_CASE("plan_stepsize reproduces the certified and necessary bounds") {
  const StepSizePlan plan = plan_stepsize(11.0, 11.0 / 12.0, 1.0);
  CHECK(std::abs(plan.alpha_sufficient - 1.0 / 12.0) <= 1e-16);
  CHECK(plan.alpha_sufficient * plan.l_estimate < 1.0);
  REQUIRE(plan.alpha_necessary_sup.has_value());
  CHECK(*plan.alpha_necessary_sup == 2.0);

  CHECK(plan_stepsize(1.0, 0.5).alpha_sufficient == 0.5);
  CHECK_THROWS_AS(plan_stepsize(0.0, 0.5), InvalidBound);
  CHECK_THROWS_AS(plan_stepsize(-2.0, 0.5), InvalidBound);
  CHECK_THROWS_AS(plan_stepsize(1.0, 1.5), InvalidBound);
  CHECK_THROWS_AS(plan_stepsize(1.0, 0.5, -1.0), InvalidBound);
}

TEST_CASE("gamma over the double-well critical points is 1") {
  const Builtin well = builtin("double-well");
  const double gamma = min_spectral_norm_over(
      well.field, {Vector{0.0, 0.0}, Vector{0.0, 1.0}, Vector{0.0, -1.0}});
  CHECK(gamma == 1.0);  // spectral radii are 1, 2, 2
}

TEST_CASE("check_lipschitz: certified bound holds, widened box violates it") {
  const Builtin well = builtin("double-well");

  const LipschitzReport ok =
      check_lipschitz(well.field, well.reference_domain, 11.0, 100000, 99);
  CHECK(ok.violation_count == 0);
  CHECK(ok.passed);
  CHECK(ok.worst_ratio <= 11.0 + 1e-9);
  CHECK(ok.pairs_tested == 100000 - ok.pairs_skipped);

  const BoxDomain widened({{-1.0, 1.0}, {-3.0, 3.0}});
  const LipschitzReport bad = check_lipschitz(well.field, widened, 11.0, 100000, 99);
  CHECK(bad.violation_count >= 1);
  CHECK_FALSE(bad.passed);
  CHECK(bad.worst_ratio > 11.0);
  CHECK(bad.violations.size() <= 100);
}

TEST_CASE("classification at every registered critical point of the catalog") {
  const Builtin saddles = builtin("line-of-saddles");
  for (double t : {-0.5, 0.0, 0.25, 1.0}) {
    Vector p = saddles.critical_points[0].point;
    for (std::size_t a = 0; a < 3; ++a) p[a] += t * (*saddles.critical_points[0].direction)[a];
    CHECK(classify(saddles.field, p).cls == CriticalClass::StrictSaddle);
  }

  const Builtin well = builtin("double-well");
  CHECK(classify(well.field, well.critical_points[0].point).cls == CriticalClass::LocalMin);
  CHECK(classify(well.field, well.critical_points[1].point).cls == CriticalClass::LocalMin);
  CHECK(classify(well.field, well.critical_points[2].point).cls == CriticalClass::StrictSaddle);

  const Builtin bowl = builtin("quadratic-bowl");
  CHECK(classify(bowl.field, bowl.critical_points[0].point).cls == CriticalClass::LocalMin);
}

TEST_CASE("check_lipschitz skips pairs that are too close to carry a ratio") {
  // a box this thin makes every sampled pair closer than the 1e-12 cutoff
  const ScalarField f = build_field("x^2", VariableOrder({"x"}));
  const LipschitzReport rep = check_lipschitz(f, BoxDomain({{0.0, 1e-13}}), 2.0, 50, 1);
  CHECK(rep.pairs_skipped == 50);
  CHECK(rep.pairs_tested == 0);
  CHECK(rep.violation_count == 0);
}

TEST_CASE("sampled Lipschitz ratios never exceed the Hessian sup, and pointwise "
          "Hessian norms stay under the analytic bound") {
  const Builtin well = builtin("double-well");
  const auto est = estimate_hessian_sup(well.field, well.reference_domain, {41, 81}, 3);

  const LipschitzReport rep =
      check_lipschitz(well.field, well.reference_domain, 11.0, 100000, 31);
  CHECK(rep.worst_ratio <= est.value + 1e-6);

  SplitMix64 rng = SplitMix64::stream(31, 1);
  for (int i = 0; i < 2000; ++i) {
    const Vector p{2 * rng.next_double_open() - 1, 4 * rng.next_double_open() - 2};
    REQUIRE(spectral_norm(well.field.hessian(p)) <= 11.0 + 1e-9);
  }
}

TEST_CASE("check_diffeomorphism: certified step passes, oversized step fails everywhere") {
  const Builtin well = builtin("double-well");

  const DiffeoReport good = check_diffeomorphism(well.field, 1.0 / 12.0,
                                                 well.reference_domain, 2000, 2000, 7);
  CHECK(good.passed);
  CHECK(good.eigen_failures == 0);
  CHECK(good.worst_abs_alpha_eig < 1.0);
  CHECK(good.collisions == 0);

  const DiffeoReport bad = check_diffeomorphism(well.field, 2.0,
                                                well.reference_domain, 2000, 0, 7);
  CHECK_FALSE(bad.eigen_ok);
  CHECK(bad.eigen_failures == bad.points_checked);  // alpha*1 = 2 in x everywhere

  const DiffeoReport id = check_diffeomorphism(well.field, 0.0,
                                               well.reference_domain, 500, 500, 7);
  CHECK(id.passed);
  CHECK(id.worst_abs_alpha_eig == 0.0);
}

TEST_CASE("forward invariance: separable certification of the certified step") {
  const Builtin well = builtin("double-well");
  const GDMap map(well.field, 1.0 / 12.0);
  const auto verdict = check_forward_invariance(map, well.reference_domain,
                                                InvarianceMode::SeparableCertify, 100001);
  REQUIRE(verdict.kind == InvarianceKind::CertifiedInvariant);
  REQUIRE(verdict.axis_bounds.size() == 2);
  const AxisRangeBound& y = verdict.axis_bounds[1];
  CHECK(std::abs(y.observed_hi - 1.5) <= 1e-6);
  CHECK(std::abs(y.observed_lo + 1.5) <= 1e-6);
  CHECK(y.margin > 0.0);
  CHECK(verdict.worst_margin > 0.0);
}

TEST_CASE("forward invariance: identity map certifies trivially") {
  const GDMap map(quadratic_bowl_field(2), 0.0);
  const auto verdict = check_forward_invariance(map, BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}}),
                                                InvarianceMode::SeparableCertify, 10);
  CHECK(verdict.kind == InvarianceKind::CertifiedInvariant);
}

TEST_CASE("forward invariance: oversized step is falsified by sampling") {
  const Builtin well = builtin("double-well");
  const GDMap map(well.field, 2.0);
  const auto verdict = check_forward_invariance(map, well.reference_domain,
                                                InvarianceMode::Sample, 10000, 5);
  REQUIRE(verdict.kind == InvarianceKind::FalsifiedAt);
  REQUIRE(verdict.witness.has_value());
  REQUIRE(verdict.image.has_value());
  CHECK(well.reference_domain.contains_closed(*verdict.witness));
  CHECK_FALSE(well.reference_domain.contains_closed(*verdict.image));
}

TEST_CASE("forward invariance: y = 1.9 is a concrete escape witness") {
  const Builtin well = builtin("double-well");
  const GDMap map(well.field, 2.0);
  const Vector image = step(map, Vector{0.0, 1.9});
  CHECK(std::abs(image[1] - (3.0 * 1.9 - 2.0 * 1.9 * 1.9 * 1.9)) <= 1e-12);
  CHECK_FALSE(well.reference_domain.contains_closed(image));
}

TEST_CASE("forward invariance: sampling never certifies") {
  const Builtin well = builtin("double-well");
  const GDMap map(well.field, 1.0 / 12.0);
  const auto verdict = check_forward_invariance(map, well.reference_domain,
                                                InvarianceMode::Sample, 5000, 5);
  CHECK(verdict.kind == InvarianceKind::Undetermined);
  CHECK(verdict.worst_margin > 0.0);
}

TEST_CASE("forward invariance: certify mode rejects coupled maps") {
  const Builtin saddles = builtin("line-of-saddles");
  const GDMap map(saddles.field, 0.1);
  CHECK_THROWS_AS(check_forward_invariance(map, saddles.reference_domain,
                                           InvarianceMode::SeparableCertify, 100),
                  ModeUnsupported);
}

TEST_CASE("separable certification never contradicts sample-mode falsification") {
  struct Case {
    const char* name;
    double alpha;
  };
  const Builtin well = builtin("double-well");
  for (const Case c : {Case{"certified", 1.0 / 12.0}, Case{"oversized", 2.0}}) {
    const GDMap map(well.field, c.alpha);
    const auto cert = check_forward_invariance(map, well.reference_domain,
                                               InvarianceMode::SeparableCertify, 20001);
    if (cert.kind == InvarianceKind::CertifiedInvariant) {
      const auto sampled = check_forward_invariance(map, well.reference_domain,
                                                    InvarianceMode::Sample, 1000000, 17);
      INFO(c.name);
      CHECK(sampled.kind == InvarianceKind::Undetermined);
    }
  }
}

TEST_CASE("instability of minima beyond the necessary step-size bound") {
  const Builtin well = builtin("double-well");

  // Jacobian spectrum at (0,1) for alpha = 2 contains modulus >= 3
  const SymmetricSpectrum spec = eigen_symmetric(well.field.hessian(Vector{0.0, 1.0}));
  const double alpha = 2.0;
  double worst = 0.0;
  for (double lambda : spec.eigenvalues)
    worst = std::max(worst, std::abs(1.0 - alpha * lambda));
  CHECK(worst >= 3.0);

  const GDMap map(well.field, alpha);
  const Trajectory traj = iterate(map, Vector{1e-6, 1.0 + 1e-6});
  const bool converged_to_min =
      traj.termination == Termination::Converged &&
      distance(*traj.limit, Vector{0.0, 1.0}) <= 1e-6;
  CHECK_FALSE(converged_to_min);
}

TEST_CASE("box syntax round-trips") {
  const BoxDomain box({{-1.0, 1.0}, {-2.0, 2.0}});
  CHECK(parse_box(format_box(box)) == box);
  CHECK(parse_box("(-1,1)x(-2,2)") == box);
  CHECK(parse_box(" ( -1 , 1 ) x ( -2 , 2 ) ") == box);

  SplitMix64 rng = SplitMix64::stream(30, 0);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<double, double>> iv;
    const std::size_t n = 1 + rng.next_below(4);
    for (std::size_t a = 0; a < n; ++a) {
      const double lo = 100.0 * (rng.next_double_open() - 0.5);
      iv.emplace_back(lo, lo + 100.0 * rng.next_double_open() + 1e-9);
    }
    const BoxDomain b(iv);
    REQUIRE(parse_box(format_box(b)) == b);
  }

  CHECK_THROWS_AS(parse_box("(1,-1)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_box("(1,2)y(3,4)"), SyntaxError);
  CHECK_THROWS_AS(parse_box("(1,2"), SyntaxError);
}
