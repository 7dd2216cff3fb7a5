#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "descent/box.hpp"
#include "descent/dynamics.hpp"
#include "descent/field.hpp"
#include "descent/linalg.hpp"
#include "descent/rng.hpp"

namespace descent {

// ---------------------------------------------------------------------------
// Critical-point classification
// ---------------------------------------------------------------------------

enum class CriticalClass { LocalMin, StrictSaddle, Degenerate, NotCritical };

inline const char* to_string(CriticalClass c) {
  switch (c) {
    case CriticalClass::LocalMin: return "local-min";
    case CriticalClass::StrictSaddle: return "strict-saddle";
    case CriticalClass::Degenerate: return "degenerate";
    case CriticalClass::NotCritical: return "not-critical";
  }
  return "?";
}

struct ClassifyOptions {
  double grad_tolerance = 1e-8;    // critical iff |grad| <= this
  double eig_tolerance_rel = 1e-6; // eps_eig = rel * max(1, spectral norm)
};

struct CriticalPointRecord {
  Vector location;
  double gradient_norm = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double eig_tolerance = 0.0;  // resolved eps_eig used for the verdict
  CriticalClass cls = CriticalClass::NotCritical;
};

/// Second-order test at a point. The eigenvalue tolerance is relative to the
/// Hessian scale so that genuine zero eigenvalues (non-isolated critical
/// manifolds) separate from numerical noise; Degenerate is a first-class
/// verdict, never forced into min or saddle.
inline CriticalPointRecord classify(const ScalarField& field, const Vector& x,
                                    const ClassifyOptions& opt = ClassifyOptions{}) {
  CriticalPointRecord rec;
  rec.location = x;
  rec.gradient_norm = norm(field.gradient(x));
  const SymmetricSpectrum spec = eigen_symmetric(field.hessian(x));
  rec.lambda_min = spec.min();
  rec.lambda_max = spec.max();
  rec.eig_tolerance = opt.eig_tolerance_rel * std::max(1.0, spec.max_abs());
  if (rec.gradient_norm > opt.grad_tolerance) {
    rec.cls = CriticalClass::NotCritical;
  } else if (rec.lambda_min < -rec.eig_tolerance) {
    rec.cls = CriticalClass::StrictSaddle;
  } else if (rec.lambda_min > rec.eig_tolerance) {
    rec.cls = CriticalClass::LocalMin;  // all eigenvalues above tolerance
  } else {
    rec.cls = CriticalClass::Degenerate;
  }
  return rec;
}

/// Polishes a seed toward the critical set by damped Newton on grad f = 0,
/// falling back to descent on |grad f|^2 when the Hessian is singular
/// (within 1e-10, relative). Returns a point with |grad| <= grad_tolerance,
/// or nullopt. Keeps iterating well below the acceptance threshold so that
/// classification sees an essentially exact critical point.
inline std::optional<Vector> refine_critical(const ScalarField& field, Vector seed,
                                             std::size_t budget = 100,
                                             double grad_tolerance = 1e-8) {
  const std::size_t n = field.dimension();
  if (seed.size() != n)
    throw std::invalid_argument("refine_critical: seed dimension mismatch");
  const double target = std::min(grad_tolerance, 1e-13);

  Vector x = std::move(seed);
  Vector g;
  try {
    g = field.gradient(x);
  } catch (const NonFiniteValue&) {
    return std::nullopt;
  }
  double gn = norm(g);

  for (std::size_t it = 0; it < budget && gn > target; ++it) {
    Vector delta;
    bool have_newton = false;
    try {
      const SymmetricMatrix h = field.hessian(x);
      Vector rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
      if (auto d = solve_linear(h, rhs)) {
        delta = std::move(*d);
        have_newton = true;
      } else {
        // Singular Hessian: steepest descent on phi = |grad f|^2 / 2, whose
        // gradient is H g; step 1/rho(H)^2 bounds phi's curvature for the
        // (locally) quadratic case.
        const double rho = spectral_norm(h);
        const double t = 1.0 / std::max(1.0, rho * rho);
        Vector hg = matvec(h, g);
        delta.resize(n);
        for (std::size_t i = 0; i < n; ++i) delta[i] = -t * hg[i];
      }
    } catch (const NonFiniteValue&) {
      return std::nullopt;
    }

    // Damping: halve until |grad| decreases.
    bool accepted = false;
    double t = 1.0;
    for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
      Vector x_try(n);
      for (std::size_t i = 0; i < n; ++i) x_try[i] = x[i] + t * delta[i];
      try {
        Vector g_try = field.gradient(x_try);
        const double gn_try = norm(g_try);
        if (gn_try < gn) {
          x = std::move(x_try);
          g = std::move(g_try);
          gn = gn_try;
          accepted = true;
          break;
        }
      } catch (const NonFiniteValue&) {
        // shrink and retry
      }
    }
    if (!accepted) break;
    (void)have_newton;
  }

  if (gn <= grad_tolerance) return x;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hessian sup estimation and step-size planning
// ---------------------------------------------------------------------------

/// Grid maximum of the Hessian spectral norm over the closure of a box,
/// optionally refined around the running maximizer. A lower bound on the
/// true sup; the margin of a step-size plan absorbs the estimation slack.
struct HessianSupEstimate {
  double value = 0.0;
  Vector maximizer;
  bool is_lower_bound = true;
};

namespace detail {

template <typename F>
void scan_grid(const std::vector<double>& lo, const std::vector<double>& hi,
               const std::vector<std::size_t>& counts, F&& visit) {
  const std::size_t n = lo.size();
  std::vector<std::size_t> idx(n, 0);
  Vector point(n);
  while (true) {
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t m = counts[a] - 1;
      point[a] = idx[a] == 0 ? lo[a]
               : idx[a] == m ? hi[a]
                             : lo[a] + (hi[a] - lo[a]) *
                                   (static_cast<double>(idx[a]) / static_cast<double>(m));
    }
    visit(point);
    std::size_t a = 0;
    while (a < n && ++idx[a] == counts[a]) idx[a++] = 0;
    if (a == n) break;
  }
}

}  // namespace detail

inline HessianSupEstimate estimate_hessian_sup(const ScalarField& field,
                                               const BoxDomain& domain,
                                               const std::vector<std::size_t>& grid,
                                               std::size_t refine_rounds = 3) {
  const std::size_t n = field.dimension();
  if (domain.dimension() != n)
    throw std::invalid_argument("estimate_hessian_sup: domain dimension mismatch");
  if (grid.size() != n)
    throw std::invalid_argument("estimate_hessian_sup: one grid count per axis required");
  double total = 1.0;
  for (std::size_t c : grid) {
    if (c < 2) throw std::invalid_argument("estimate_hessian_sup: grid counts must be >= 2");
    total *= static_cast<double>(c);
  }
  if (total > 1e7)
    throw std::invalid_argument("estimate_hessian_sup: grid too large (> 1e7 points)");

  HessianSupEstimate best;
  best.value = -std::numeric_limits<double>::infinity();
  auto visit = [&](const Vector& p) {
    const double v = spectral_norm(field.hessian(p));
    if (v > best.value) {
      best.value = v;
      best.maximizer = p;
    }
  };

  std::vector<double> lo(n), hi(n);
  for (std::size_t a = 0; a < n; ++a) {
    lo[a] = domain.lo(a);
    hi[a] = domain.hi(a);
  }
  detail::scan_grid(lo, hi, grid, visit);

  for (std::size_t round = 0; round < refine_rounds; ++round) {
    std::vector<double> spacing(n);
    for (std::size_t a = 0; a < n; ++a)
      spacing[a] = (hi[a] - lo[a]) / static_cast<double>(grid[a] - 1);
    for (std::size_t a = 0; a < n; ++a) {
      lo[a] = std::max(domain.lo(a), best.maximizer[a] - spacing[a]);
      hi[a] = std::min(domain.hi(a), best.maximizer[a] + spacing[a]);
      if (!(lo[a] < hi[a])) {  // collapsed axis; re-open one cell
        lo[a] = std::max(domain.lo(a), best.maximizer[a] - spacing[a] / 2.0);
        hi[a] = std::min(domain.hi(a), lo[a] + spacing[a]);
      }
    }
    detail::scan_grid(lo, hi, grid, visit);
  }
  return best;
}

/// Sufficient and necessary step-size bounds: alpha_sufficient = margin / L
/// keeps alpha * L < 1; alpha_necessary_sup = 2 / gamma is the threshold
/// beyond which every local minimum with Hessian norm above gamma turns
/// unstable.
struct StepSizePlan {
  double l_estimate = 0.0;
  double margin = 0.0;
  double alpha_sufficient = 0.0;
  std::optional<double> gamma;
  std::optional<double> alpha_necessary_sup;
};

inline StepSizePlan plan_stepsize(double l, double margin,
                                  std::optional<double> gamma = std::nullopt) {
  if (!(l > 0.0) || !std::isfinite(l))
    throw InvalidBound("plan_stepsize: L must be positive and finite");
  if (!(margin > 0.0) || !(margin < 1.0))
    throw InvalidBound("plan_stepsize: margin must lie in (0,1)");
  if (gamma && (!(*gamma > 0.0) || !std::isfinite(*gamma)))
    throw InvalidBound("plan_stepsize: gamma must be positive and finite");
  StepSizePlan plan;
  plan.l_estimate = l;
  plan.margin = margin;
  plan.alpha_sufficient = margin / l;
  plan.gamma = gamma;
  if (gamma) plan.alpha_necessary_sup = 2.0 / *gamma;
  return plan;
}

/// min over the given points of the Hessian spectral norm; feeds the gamma
/// parameter of the necessary bound when evaluated over local minima.
inline double min_spectral_norm_over(const ScalarField& field,
                                     const std::vector<Vector>& points) {
  if (points.empty())
    throw std::invalid_argument("min_spectral_norm_over: no points");
  double m = std::numeric_limits<double>::infinity();
  for (const Vector& p : points) m = std::min(m, spectral_norm(field.hessian(p)));
  return m;
}

// ---------------------------------------------------------------------------
// Lipschitz sampling check (gradient increments vs. L * distance)
// ---------------------------------------------------------------------------

namespace detail {

inline Vector uniform_in_box(const BoxDomain& box, SplitMix64& rng) {
  Vector x(box.dimension());
  for (std::size_t a = 0; a < box.dimension(); ++a)
    x[a] = box.lo(a) + rng.next_double_open() * box.width(a);
  return x;
}

}  // namespace detail

struct LipschitzViolation {
  Vector x, y;
  double ratio;
};

struct LipschitzReport {
  double l = 0.0;
  std::size_t pairs_requested = 0;
  std::size_t pairs_tested = 0;
  std::size_t pairs_skipped = 0;  // |x - y| < 1e-12, ratio undefined
  std::size_t violation_count = 0;
  std::vector<LipschitzViolation> violations;  // first 100
  double worst_ratio = 0.0;
  Vector worst_x, worst_y;
  bool passed = false;
};

/// Samples pairs uniformly in the box and tests
/// |grad f(x) - grad f(y)| <= L * |x - y| * (1 + 1e-10).
inline LipschitzReport check_lipschitz(const ScalarField& field,
                                       const BoxDomain& domain, double l,
                                       std::size_t pair_samples,
                                       std::uint64_t seed) {
  if (!(l > 0.0)) throw InvalidBound("check_lipschitz: L must be positive");
  if (domain.dimension() != field.dimension())
    throw std::invalid_argument("check_lipschitz: domain dimension mismatch");

  LipschitzReport report;
  report.l = l;
  report.pairs_requested = pair_samples;
  const double slack = 1.0 + 1e-10;

  for (std::size_t i = 0; i < pair_samples; ++i) {
    SplitMix64 rng = SplitMix64::substream(seed, 0x11, i);
    const Vector x = detail::uniform_in_box(domain, rng);
    const Vector y = detail::uniform_in_box(domain, rng);
    const double d = distance(x, y);
    if (d < 1e-12) {
      ++report.pairs_skipped;
      continue;
    }
    const double dg = distance(field.gradient(x), field.gradient(y));
    const double ratio = dg / d;
    ++report.pairs_tested;
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_x = x;
      report.worst_y = y;
    }
    if (dg > l * d * slack) {
      ++report.violation_count;
      if (report.violations.size() < 100) report.violations.push_back({x, y, ratio});
    }
  }
  report.passed = report.violation_count == 0;
  return report;
}

// ---------------------------------------------------------------------------
// Diffeomorphism diagnostics (Jacobian eigenvalues + injectivity sampling)
// ---------------------------------------------------------------------------

struct DiffeoReport {
  double alpha = 0.0;
  std::size_t points_checked = 0;
  std::size_t eigen_failures = 0;  // points where max |alpha * lambda| >= 1
  double worst_abs_alpha_eig = 0.0;
  std::optional<Vector> first_eigen_failure;
  std::size_t pairs_checked = 0;
  std::size_t pairs_skipped = 0;
  std::size_t collisions = 0;  // g(x) == g(y) for distinct x, y
  double min_separation_ratio = std::numeric_limits<double>::infinity();
  std::optional<std::pair<Vector, Vector>> first_collision;
  bool eigen_ok = false;
  bool injective_ok = false;
  bool passed = false;
};

/// (a) At sampled points the spectrum of alpha * Hessian must stay inside
/// (-1, 1), equivalently the Jacobian I - alpha * Hessian has spectrum in
/// (0, 2). (b) Sampled distinct pairs must map to distinct images.
inline DiffeoReport check_diffeomorphism(const ScalarField& field, double alpha,
                                         const BoxDomain& domain,
                                         std::size_t point_samples,
                                         std::size_t pair_samples,
                                         std::uint64_t seed) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("check_diffeomorphism: alpha must be finite and >= 0");
  if (domain.dimension() != field.dimension())
    throw std::invalid_argument("check_diffeomorphism: domain dimension mismatch");

  DiffeoReport report;
  report.alpha = alpha;

  for (std::size_t i = 0; i < point_samples; ++i) {
    SplitMix64 rng = SplitMix64::substream(seed, 0x21, i);
    const Vector p = detail::uniform_in_box(domain, rng);
    const double rho = spectral_norm(field.hessian(p));
    const double worst = alpha * rho;
    ++report.points_checked;
    report.worst_abs_alpha_eig = std::max(report.worst_abs_alpha_eig, worst);
    if (worst >= 1.0) {
      ++report.eigen_failures;
      if (!report.first_eigen_failure) report.first_eigen_failure = p;
    }
  }

  Vector gx(field.dimension()), gy(field.dimension());
  for (std::size_t i = 0; i < pair_samples; ++i) {
    SplitMix64 rng = SplitMix64::substream(seed, 0x22, i);
    const Vector x = detail::uniform_in_box(domain, rng);
    const Vector y = detail::uniform_in_box(domain, rng);
    const double d = distance(x, y);
    if (d < 1e-12) {
      ++report.pairs_skipped;
      continue;
    }
    field.gradient_into(x, gx);
    field.gradient_into(y, gy);
    double ds = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
      const double diff = (x[a] - alpha * gx[a]) - (y[a] - alpha * gy[a]);
      ds += diff * diff;
    }
    const double image_d = std::sqrt(ds);
    ++report.pairs_checked;
    report.min_separation_ratio = std::min(report.min_separation_ratio, image_d / d);
    if (image_d <= 1e-12 * d) {
      ++report.collisions;
      if (!report.first_collision) report.first_collision = std::make_pair(x, y);
    }
  }

  report.eigen_ok = report.eigen_failures == 0;
  report.injective_ok = report.collisions == 0;
  report.passed = report.eigen_ok && report.injective_ok;
  return report;
}

// ---------------------------------------------------------------------------
// Forward invariance
// ---------------------------------------------------------------------------

enum class InvarianceKind { CertifiedInvariant, FalsifiedAt, Undetermined };

inline const char* to_string(InvarianceKind k) {
  switch (k) {
    case InvarianceKind::CertifiedInvariant: return "certified-invariant";
    case InvarianceKind::FalsifiedAt: return "falsified-at";
    case InvarianceKind::Undetermined: return "undetermined";
  }
  return "?";
}

/// Per-axis image bounds from the separable certification sweep. The
/// bounded range widens the observed grid range by the derivative-bound
/// error term max|g_i'| * spacing.
struct AxisRangeBound {
  double observed_lo = 0.0;
  double observed_hi = 0.0;
  double derivative_bound = 0.0;
  double error_term = 0.0;
  double bounded_lo = 0.0;
  double bounded_hi = 0.0;
  double margin = 0.0;  // distance of the bounded range to the closed interval
};

struct InvarianceVerdict {
  InvarianceKind kind = InvarianceKind::Undetermined;
  std::optional<Vector> witness;  // FalsifiedAt: pre-image
  std::optional<Vector> image;    // FalsifiedAt: its image outside the box
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<AxisRangeBound> axis_bounds;  // certify mode
  std::size_t samples_checked = 0;
  std::string note;
};

enum class InvarianceMode { Sample, SeparableCertify };

/// Sample mode draws `density` uniform points plus `density` boundary-shell
/// points (within 1e-3 of a face) and falsifies on the first image outside
/// the closed box; it never certifies. Separable-certify mode requires every
/// off-diagonal Hessian expression to be the zero expression (so each map
/// component depends on its own coordinate alone), bounds each 1-D component
/// over a dense grid plus the derivative error term, and certifies when every
/// bounded range stays inside the closed interval (margin >= 0; the open box
/// is treated as its closure).
inline InvarianceVerdict check_forward_invariance(const GDMap& map,
                                                  const BoxDomain& domain,
                                                  InvarianceMode mode,
                                                  std::size_t density,
                                                  std::uint64_t seed = 0) {
  const std::size_t n = map.field.dimension();
  if (domain.dimension() != n)
    throw std::invalid_argument("check_forward_invariance: domain dimension mismatch");

  InvarianceVerdict verdict;

  if (map.alpha == 0.0) {
    // g is the identity; the closed box maps to itself exactly. The grid
    // estimator cannot see a zero-margin map through rounding, so this edge
    // is certified directly.
    verdict.kind = InvarianceKind::CertifiedInvariant;
    verdict.worst_margin = 0.0;
    verdict.note = "alpha = 0: map is the identity";
    return verdict;
  }

  if (mode == InvarianceMode::Sample) {
    Vector image(n);
    auto test_point = [&](const Vector& p) -> bool {
      const Vector g = map.field.gradient(p);
      for (std::size_t a = 0; a < n; ++a) image[a] = p[a] - map.alpha * g[a];
      ++verdict.samples_checked;
      const double margin = domain.boundary_margin(image);
      verdict.worst_margin = std::min(verdict.worst_margin, margin);
      if (!domain.contains_closed(image)) {
        verdict.kind = InvarianceKind::FalsifiedAt;
        verdict.witness = p;
        verdict.image = image;
        return false;
      }
      return true;
    };

    for (std::size_t i = 0; i < density; ++i) {
      SplitMix64 rng = SplitMix64::substream(seed, 0x31, i);
      if (!test_point(detail::uniform_in_box(domain, rng))) return verdict;
    }
    for (std::size_t i = 0; i < density; ++i) {
      SplitMix64 rng = SplitMix64::substream(seed, 0x32, i);
      Vector p = detail::uniform_in_box(domain, rng);
      const std::size_t face = static_cast<std::size_t>(rng.next_below(2 * n));
      const std::size_t axis = face / 2;
      const double offset =
          rng.next_double_open() * std::min(1e-3, domain.width(axis));
      p[axis] = (face % 2 == 0) ? domain.lo(axis) + offset : domain.hi(axis) - offset;
      if (!test_point(p)) return verdict;
    }
    verdict.kind = InvarianceKind::Undetermined;
    verdict.note = "sampling cannot certify; no escape found";
    return verdict;
  }

  // Separable certification.
  if (density < 10)
    throw std::invalid_argument("check_forward_invariance: certify mode needs density >= 10");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!map.field.hessian_expr(i, j).is_zero())
        throw ModeUnsupported(
            "separable-certify requires each map component to depend on its own "
            "coordinate alone (off-diagonal Hessian expression is not zero)");

  verdict.axis_bounds.resize(n);
  Vector point(n);
  for (std::size_t a = 0; a < n; ++a)
    point[a] = 0.5 * (domain.lo(a) + domain.hi(a));

  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    const Expr& grad_a = map.field.gradient_expr(a);
    const Expr& hess_aa = map.field.hessian_expr(a, a);
    const double lo = domain.lo(a), hi = domain.hi(a);
    const std::size_t m = density - 1;
    const double spacing = (hi - lo) / static_cast<double>(m);

    AxisRangeBound& bound = verdict.axis_bounds[a];
    bound.observed_lo = std::numeric_limits<double>::infinity();
    bound.observed_hi = -std::numeric_limits<double>::infinity();

    Vector probe = point;
    for (std::size_t k = 0; k <= m; ++k) {
      const double t = k == 0 ? lo
                     : k == m ? hi
                              : lo + (hi - lo) * (static_cast<double>(k) / static_cast<double>(m));
      probe[a] = t;
      const double phi = t - map.alpha * grad_a.eval(probe);
      const double dphi = 1.0 - map.alpha * hess_aa.eval(probe);
      ++verdict.samples_checked;
      bound.observed_lo = std::min(bound.observed_lo, phi);
      bound.observed_hi = std::max(bound.observed_hi, phi);
      bound.derivative_bound = std::max(bound.derivative_bound, std::abs(dphi));
      if (phi < lo || phi > hi) {
        // concrete counterexample seen on the grid
        Vector image = point;
        image[a] = phi;
        Vector witness = point;
        witness[a] = t;
        verdict.kind = InvarianceKind::FalsifiedAt;
        verdict.witness = witness;
        verdict.image = image;
        verdict.worst_margin = domain.boundary_margin(image);
        return verdict;
      }
    }

    bound.error_term = bound.derivative_bound * spacing;
    bound.bounded_lo = bound.observed_lo - bound.error_term;
    bound.bounded_hi = bound.observed_hi + bound.error_term;
    bound.margin = std::min(bound.bounded_lo - lo, hi - bound.bounded_hi);
    min_margin = std::min(min_margin, bound.margin);
  }

  verdict.worst_margin = min_margin;
  if (min_margin >= 0.0) {
    verdict.kind = InvarianceKind::CertifiedInvariant;
  } else {
    verdict.kind = InvarianceKind::Undetermined;
    verdict.note = "bounded range not contained in the closed box; no grid escape found";
  }
  return verdict;
}

}  // namespace descent
