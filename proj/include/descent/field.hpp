#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "descent/box.hpp"
#include "descent/expr.hpp"
#include "descent/linalg.hpp"

namespace descent {

/// Twice-differentiable cost function with exact symbolic gradient and
/// Hessian. All derivative expressions are built once, at construction; the
/// evaluated Hessian is symmetric by representation (the upper triangle is
/// the only thing stored or evaluated).
class ScalarField {
 public:
  explicit ScalarField(Expr f) : f_(std::move(f)), n_(f_.vars().size()) {
    if (n_ == 0)
      throw std::invalid_argument("ScalarField: expression declares no variables");
    grad_.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) grad_.push_back(f_.derivative(i));
    hess_upper_.reserve(n_ * (n_ + 1) / 2);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j)
        hess_upper_.push_back(grad_[i].derivative(j));
  }

  std::size_t dimension() const { return n_; }
  const VariableOrder& vars() const { return f_.vars(); }
  const Expr& value_expr() const { return f_; }
  const Expr& gradient_expr(std::size_t i) const { return grad_.at(i); }

  /// Hessian entry expression; (i,j) and (j,i) are the same expression.
  const Expr& hessian_expr(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return hess_upper_.at(i * n_ - i * (i - 1) / 2 + (j - i));
  }

  double value(std::span<const double> x) const { return f_.eval(x); }

  Vector gradient(std::span<const double> x) const {
    Vector g(n_);
    gradient_into(x, g);
    return g;
  }

  void gradient_into(std::span<const double> x, Vector& out) const {
    out.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = grad_[i].eval(x);
  }

  SymmetricMatrix hessian(std::span<const double> x) const {
    SymmetricMatrix h(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) h.set(i, j, hessian_expr(i, j).eval(x));
    return h;
  }

 private:
  Expr f_;
  std::vector<Expr> grad_;
  std::vector<Expr> hess_upper_;
  std::size_t n_;
};

/// Parses f_text and precomputes all derivative expressions.
inline ScalarField build_field(std::string_view f_text, const VariableOrder& vars) {
  return ScalarField(parse(f_text, vars));
}

/// Finite-difference cross-check of the symbolic derivatives.
/// Errors are |symbolic - fd| / max(1, |symbolic|): relative for large
/// entries, absolute near zero (a pure relative error is unbounded wherever
/// a derivative component vanishes).
struct CheckReport {
  std::size_t points_checked = 0;
  std::size_t nonfinite_points = 0;  // recorded, not fatal
  double max_gradient_error = 0.0;
  double max_hessian_error = 0.0;
  double gradient_tolerance = 0.0;
  double hessian_tolerance = 0.0;
  bool passed = false;
};

inline CheckReport fd_check(const ScalarField& field,
                            const std::vector<Vector>& points,
                            double gradient_tolerance,
                            double hessian_tolerance,
                            double h_grad = 1e-5, double h_hess = 1e-4) {
  if (h_grad <= 0.0 || h_hess <= 0.0)
    throw std::invalid_argument("fd_check: step sizes must be positive");
  const std::size_t n = field.dimension();
  CheckReport report;
  report.gradient_tolerance = gradient_tolerance;
  report.hessian_tolerance = hessian_tolerance;

  for (const Vector& p : points) {
    try {
      Vector work = p;
      const Vector g = field.gradient(p);
      for (std::size_t i = 0; i < n; ++i) {
        work[i] = p[i] + h_grad;
        const double fp = field.value(work);
        work[i] = p[i] - h_grad;
        const double fm = field.value(work);
        work[i] = p[i];
        const double fd = (fp - fm) / (2.0 * h_grad);
        const double err = std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i]));
        report.max_gradient_error = std::max(report.max_gradient_error, err);
      }

      const SymmetricMatrix h = field.hessian(p);
      const double f0 = field.value(p);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          double fd;
          if (i == j) {
            work[i] = p[i] + h_hess;
            const double fp = field.value(work);
            work[i] = p[i] - h_hess;
            const double fm = field.value(work);
            work[i] = p[i];
            fd = (fp - 2.0 * f0 + fm) / (h_hess * h_hess);
          } else {
            work[i] = p[i] + h_hess; work[j] = p[j] + h_hess;
            const double fpp = field.value(work);
            work[j] = p[j] - h_hess;
            const double fpm = field.value(work);
            work[i] = p[i] - h_hess;
            const double fmm = field.value(work);
            work[j] = p[j] + h_hess;
            const double fmp = field.value(work);
            work[i] = p[i]; work[j] = p[j];
            fd = (fpp - fpm - fmp + fmm) / (4.0 * h_hess * h_hess);
          }
          const double err = std::abs(h(i, j) - fd) / std::max(1.0, std::abs(h(i, j)));
          report.max_hessian_error = std::max(report.max_hessian_error, err);
        }
      }
      ++report.points_checked;
    } catch (const NonFiniteValue&) {
      ++report.nonfinite_points;
    }
  }

  report.passed = report.max_gradient_error <= gradient_tolerance &&
                  report.max_hessian_error <= hessian_tolerance;
  return report;
}

inline CheckReport fd_check(const ScalarField& field,
                            const std::vector<Vector>& points, double tol) {
  return fd_check(field, points, tol, tol);
}

/// A critical point known in closed form: either an isolated point or a
/// whole line {point + t * direction}.
struct KnownCriticalPoint {
  Vector point;
  std::optional<Vector> direction;  // set for a line of critical points
  std::string label;
};

/// A named builtin cost function with its reference domain and the critical
/// points known analytically. Builtin expressions are assembled directly
/// from AST factories (never through the parser) with the literal rational
/// coefficients, so golden tests do not depend on the parser.
struct Builtin {
  std::string name;
  ScalarField field;
  BoxDomain reference_domain;
  std::vector<KnownCriticalPoint> critical_points;
};

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {
      "line-of-saddles", "double-well", "quadratic-bowl"};
  return names;
}

inline bool is_builtin(std::string_view name) {
  for (const auto& n : builtin_names())
    if (n == name) return true;
  return false;
}

/// f = (1/2)|x|^2 in the given dimension; unique minimum at the origin.
inline ScalarField quadratic_bowl_field(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dim; ++i) names.push_back("x" + std::to_string(i + 1));
  if (dim == 2) names = {"x", "y"};
  VariableOrder vars(std::move(names));
  Expr f = Expr::constant(0.0);
  for (std::size_t i = 0; i < dim; ++i)
    f = f + Expr::pow(Expr::variable(vars, i), 2) / Expr::constant(2.0);
  return ScalarField(std::move(f));
}

/// Builtin lookup. quadratic_bowl_dim applies only to "quadratic-bowl".
inline Builtin builtin(std::string_view name, std::size_t quadratic_bowl_dim = 2) {
  if (name == "line-of-saddles") {
    // f(x,y,z) = 2xy + 2xz - 2x - y - z; critical points are the line
    // (1/2, w, 1-w), all strict saddles.
    VariableOrder vars({"x", "y", "z"});
    const Expr x = Expr::variable(vars, 0);
    const Expr y = Expr::variable(vars, 1);
    const Expr z = Expr::variable(vars, 2);
    const Expr two = Expr::constant(2.0);
    Expr f = two * x * y + two * x * z - two * x - y - z;
    return Builtin{
        "line-of-saddles", ScalarField(std::move(f)),
        BoxDomain({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}),
        {{{0.5, 0.0, 1.0}, Vector{0.0, 1.0, -1.0}, "line x=1/2, y+z=1"}}};
  }
  if (name == "double-well") {
    // f(x,y) = x^2/2 + y^4/4 - y^2/2; saddle at (0,0), minima at (0,+-1).
    VariableOrder vars({"x", "y"});
    const Expr x = Expr::variable(vars, 0);
    const Expr y = Expr::variable(vars, 1);
    Expr f = Expr::pow(x, 2) / Expr::constant(2.0) +
             Expr::pow(y, 4) / Expr::constant(4.0) -
             Expr::pow(y, 2) / Expr::constant(2.0);
    return Builtin{
        "double-well", ScalarField(std::move(f)),
        BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}}),
        {{{0.0, 1.0}, std::nullopt, "(0,1)"},
         {{0.0, -1.0}, std::nullopt, "(0,-1)"},
         {{0.0, 0.0}, std::nullopt, "(0,0)"}}};
  }
  if (name == "quadratic-bowl") {
    const std::size_t dim = quadratic_bowl_dim == 0 ? 2 : quadratic_bowl_dim;
    std::vector<std::pair<double, double>> box(dim, {-1.0, 1.0});
    return Builtin{"quadratic-bowl", quadratic_bowl_field(dim), BoxDomain(box),
                   {{Vector(dim, 0.0), std::nullopt, "origin"}}};
  }
  throw ConfigError("unknown builtin field '" + std::string(name) +
                    "' (expected line-of-saddles, double-well, or quadratic-bowl)");
}

}  // namespace descent
