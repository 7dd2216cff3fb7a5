#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "descent/field.hpp"
#include "descent/rng.hpp"

using namespace descent;

namespace {

Vector random_in(const BoxDomain& box, SplitMix64& rng) {
  Vector p(box.dimension());
  for (std::size_t a = 0; a < p.size(); ++a)
    p[a] = box.lo(a) + box.width(a) * rng.next_double_open();
  return p;
}

}  // namespace

TEST_CASE("build_field: saddle-line gradient components") {
  const ScalarField f = build_field("2*x*y+2*x*z-2*x-y-z", VariableOrder({"x", "y", "z"}));
  REQUIRE(f.dimension() == 3);
  SplitMix64 rng = SplitMix64::stream(10, 0);
  for (int i = 0; i < 100; ++i) {
    Vector p(3);
    for (auto& v : p) v = 4.0 * rng.next_double_open() - 2.0;
    const Vector g = f.gradient(p);
    CHECK(std::abs(g[0] - (2 * p[1] + 2 * p[2] - 2)) <= 1e-14);
    CHECK(std::abs(g[1] - (2 * p[0] - 1)) <= 1e-14);
    CHECK(std::abs(g[2] - (2 * p[0] - 1)) <= 1e-14);
  }
}

TEST_CASE("build_field: constant field has zero derivatives") {
  const ScalarField f = build_field("0", VariableOrder({"x"}));
  CHECK(f.gradient(Vector{1.23})[0] == 0.0);
  CHECK(f.hessian(Vector{1.23})(0, 0) == 0.0);
}

TEST_CASE("build_field: double-well Hessian is diag(1, 3y^2-1)") {
  const ScalarField f = build_field("x^2/2+y^4/4-y^2/2", VariableOrder({"x", "y"}));
  SplitMix64 rng = SplitMix64::stream(10, 1);
  for (int i = 0; i < 100; ++i) {
    const Vector p{2 * rng.next_double_open() - 1, 4 * rng.next_double_open() - 2};
    const SymmetricMatrix h = f.hessian(p);
    CHECK(std::abs(h(0, 0) - 1.0) <= 1e-15);
    CHECK(h(0, 1) == 0.0);
    CHECK(std::abs(h(1, 1) - (3 * p[1] * p[1] - 1)) <= 1e-14);
  }
}

TEST_CASE("gradient vanishes along the saddle line") {
  const Builtin b = builtin("line-of-saddles");
  for (double w : {0.0, 0.5, 1.0}) {
    const Vector g = b.field.gradient(Vector{0.5, w, 1.0 - w});
    CHECK(norm(g) == 0.0);
  }
}

TEST_CASE("double-well gradient at (0.5, 0.5)") {
  const Builtin b = builtin("double-well");
  const Vector g = b.field.gradient(Vector{0.5, 0.5});
  CHECK(g[0] == 0.5);
  CHECK(g[1] == -0.375);  // y^3 - y at 0.5, exact in binary arithmetic
}

TEST_CASE("builtin Hessians at the worked points") {
  const Builtin saddles = builtin("line-of-saddles");
  SplitMix64 rng = SplitMix64::stream(10, 2);
  for (int i = 0; i < 10; ++i) {
    Vector p(3);
    for (auto& v : p) v = 2.0 * rng.next_double_open() - 1.0;
    const SymmetricMatrix h = saddles.field.hessian(p);
    CHECK(h(0, 0) == 0.0);
    CHECK(h(0, 1) == 2.0);
    CHECK(h(0, 2) == 2.0);
    CHECK(h(1, 1) == 0.0);
    CHECK(h(1, 2) == 0.0);
    CHECK(h(2, 2) == 0.0);
  }

  const Builtin well = builtin("double-well");
  const SymmetricMatrix h = well.field.hessian(Vector{0.0, 2.0});
  CHECK(h(0, 0) == 1.0);
  CHECK(h(1, 1) == 11.0);
  CHECK(h(0, 1) == 0.0);

  const ScalarField constant = build_field("3", VariableOrder({"x", "y"}));
  const SymmetricMatrix hz = constant.hessian(Vector{1.0, 1.0});
  CHECK(hz.max_abs() == 0.0);
}

TEST_CASE("quadratic bowl generalizes across dimensions") {
  for (std::size_t n : {1u, 2u, 4u}) {
    const ScalarField f = quadratic_bowl_field(n);
    Vector p(n, 0.5);
    const Vector g = f.gradient(p);
    for (std::size_t i = 0; i < n; ++i) CHECK(g[i] == 0.5);
    const SymmetricMatrix h = f.hessian(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        CHECK(h(i, j) == (i == j ? 1.0 : 0.0));
  }
}

TEST_CASE("fd_check on the double-well reference domain") {
  const Builtin b = builtin("double-well");
  SplitMix64 rng = SplitMix64::stream(10, 3);
  std::vector<Vector> points;
  for (int i = 0; i < 100; ++i) points.push_back(random_in(b.reference_domain, rng));
  const CheckReport report = fd_check(b.field, points, 1e-6, 1e-4);
  CHECK(report.points_checked == 100);
  CHECK(report.nonfinite_points == 0);
  CHECK(report.max_gradient_error <= 1e-6);
  CHECK(report.passed);
}

TEST_CASE("fd_check is exact for a constant field") {
  const ScalarField f = build_field("42", VariableOrder({"x", "y"}));
  const CheckReport report = fd_check(f, {{0.1, 0.2}, {1.0, -1.0}}, 1e-12);
  CHECK(report.max_gradient_error == 0.0);
  CHECK(report.max_hessian_error == 0.0);
  CHECK(report.passed);
}

TEST_CASE("fd_check Hessian error stays tiny for the affine-gradient field") {
  const Builtin b = builtin("line-of-saddles");
  SplitMix64 rng = SplitMix64::stream(10, 4);
  std::vector<Vector> points;
  for (int i = 0; i < 50; ++i) points.push_back(random_in(b.reference_domain, rng));
  const CheckReport report = fd_check(b.field, points, 1e-6, 1e-7);
  CHECK(report.max_hessian_error <= 1e-7);
  CHECK(report.passed);
}

TEST_CASE("fd_check records non-finite sample points without failing") {
  const ScalarField f = build_field("1/x", VariableOrder({"x"}));
  const CheckReport report = fd_check(f, {{1.0}, {0.0}, {2.0}}, 1e-4);
  CHECK(report.points_checked == 2);
  CHECK(report.nonfinite_points == 1);
}

TEST_CASE("all builtins pass fd_check over 1000 reference-domain points") {
  SplitMix64 rng = SplitMix64::stream(10, 5);
  for (const auto& name : builtin_names()) {
    const Builtin b = builtin(name);
    std::vector<Vector> points;
    for (int i = 0; i < 1000; ++i) points.push_back(random_in(b.reference_domain, rng));
    const CheckReport report = fd_check(b.field, points, 1e-5);
    INFO(name);
    CHECK(report.points_checked == 1000);
    CHECK(report.passed);
  }
}

TEST_CASE("gradient is numerically zero at every registered critical point") {
  for (const auto& name : builtin_names()) {
    const Builtin b = builtin(name);
    for (const auto& kp : b.critical_points) {
      if (kp.direction) {
        for (double t : {-0.7, 0.0, 0.4}) {
          Vector p = kp.point;
          for (std::size_t a = 0; a < p.size(); ++a) p[a] += t * (*kp.direction)[a];
          CHECK(norm(b.field.gradient(p)) <= 1e-12);
        }
      } else {
        CHECK(norm(b.field.gradient(kp.point)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("hessian expressions are shared across the symmetric pair") {
  const Builtin b = builtin("double-well");
  CHECK(&b.field.hessian_expr(0, 1) == &b.field.hessian_expr(1, 0));
}
