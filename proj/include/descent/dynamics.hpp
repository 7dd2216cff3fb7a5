#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "descent/box.hpp"
#include "descent/field.hpp"
#include "descent/linalg.hpp"

namespace descent {

/// The gradient-descent map g(x) = x - alpha * grad f(x).
/// alpha = 0 is accepted (g is then the identity); it is exercised by the
/// diffeomorphism and invariance edge cases.
struct GDMap {
  ScalarField field;
  double alpha;

  GDMap(ScalarField f, double a) : field(std::move(f)), alpha(a) {
    if (!std::isfinite(a) || a < 0.0)
      throw std::invalid_argument("GDMap: step size must be finite and >= 0");
  }
};

inline Vector step(const GDMap& map, std::span<const double> x) {
  Vector g = map.field.gradient(x);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - map.alpha * g[i];
  return out;
}

struct IterateOptions {
  std::size_t budget = 100000;
  double grad_tolerance = 1e-8;   // convergence needs both this ...
  double step_tolerance = 1e-10;  // ... and this
  double divergence_radius = 1e8;
  double divergence_value = -1e12;
  double cycle_tolerance = 1e-9;
  std::size_t cycle_window = 20;  // consecutive k required for a certificate
  std::size_t record_stride = 0;  // 0 = auto: 1 while n*budget <= 1e6, else wider
};

enum class Termination { Converged, Diverged, ExitedDomain, Cycling, BudgetExhausted };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::Diverged: return "diverged";
    case Termination::ExitedDomain: return "exited-domain";
    case Termination::Cycling: return "cycling";
    case Termination::BudgetExhausted: return "budget-exhausted";
  }
  return "?";
}

/// Period-2 certificate: the listed coordinates alternate between the two
/// representative states while visibly moving (anti-stationarity guard).
struct CycleCertificate {
  std::vector<std::size_t> coordinates;
  Vector first, second;
  std::size_t detected_at = 0;
};

/// Scans a window of consecutive iterates for coordinates that alternate
/// with period 2: |x_i(k+2) - x_i(k)| <= cycle_tolerance while
/// |x_i(k+1) - x_i(k)| > 10 * cycle_tolerance, for every k the window
/// covers. A window of W+2 iterates certifies persistence W. Per-coordinate
/// detection is what the alternating-coordinate construction produces: the
/// remaining coordinates of such a map need not settle at all.
inline std::optional<CycleCertificate> detect_cycle(
    std::span<const Vector> window, double cycle_tolerance) {
  if (window.size() < 4) return std::nullopt;
  const std::size_t n = window.front().size();
  const double guard = 10.0 * cycle_tolerance;

  std::vector<std::size_t> cycling;
  for (std::size_t c = 0; c < n; ++c) {
    bool ok = true;
    for (std::size_t k = 0; k + 2 < window.size() && ok; ++k) {
      const double two_apart = std::abs(window[k + 2][c] - window[k][c]);
      const double one_apart = std::abs(window[k + 1][c] - window[k][c]);
      ok = two_apart <= cycle_tolerance && one_apart > guard;
    }
    if (ok) cycling.push_back(c);
  }
  if (cycling.empty()) return std::nullopt;

  CycleCertificate cert;
  cert.coordinates = std::move(cycling);
  cert.first = window[window.size() - 2];
  cert.second = window[window.size() - 1];
  return cert;
}

/// One recorded sample of a trajectory.
struct TrajectorySample {
  std::size_t iteration;
  Vector point;
  double value;
  double gradient_norm;
};

struct Trajectory {
  Vector initial;
  std::vector<TrajectorySample> recorded;  // every stride-th iterate plus the last two
  std::size_t iterations = 0;
  Termination termination = Termination::BudgetExhausted;
  std::optional<Vector> limit;              // Converged
  std::optional<std::size_t> exit_step;     // ExitedDomain
  std::optional<CycleCertificate> cycle;    // Cycling
  bool nonfinite = false;       // Diverged because an evaluation left the reals
  bool non_convergent = false;  // BudgetExhausted while still moving
  double final_gradient_norm = std::numeric_limits<double>::quiet_NaN();
  double final_value = std::numeric_limits<double>::quiet_NaN();
};

/// Runs x_{k+1} = x_k - alpha * grad f(x_k) until the first of: convergence
/// (gradient and step tolerances both met), divergence (radius or value
/// threshold, or a non-finite evaluation), domain exit (when a domain is
/// given; the open box is tested as its closure), a period-2 cycle
/// certificate, or budget exhaustion.
inline Trajectory iterate(const GDMap& map, Vector x0,
                          const std::optional<BoxDomain>& domain = std::nullopt,
                          const IterateOptions& opt = IterateOptions{}) {
  if (opt.budget < 1) throw std::invalid_argument("iterate: budget must be >= 1");
  if (opt.grad_tolerance <= 0 || opt.step_tolerance <= 0 || opt.cycle_tolerance <= 0)
    throw std::invalid_argument("iterate: tolerances must be positive");
  const std::size_t n = map.field.dimension();
  if (x0.size() != n) throw std::invalid_argument("iterate: x0 dimension mismatch");
  if (!all_finite(x0)) throw std::invalid_argument("iterate: x0 must be finite");

  std::size_t stride = opt.record_stride;
  if (stride == 0) {
    const std::size_t cells = n * opt.budget;
    stride = cells <= 1000000 ? 1 : (cells + 999999) / 1000000;
  }

  Trajectory traj;
  traj.initial = x0;

  Vector x = x0;
  Vector g(n), x_new(n);
  double f, gnorm;
  bool entry_finite = true;
  try {
    f = map.field.value(x);
    map.field.gradient_into(x, g);
    gnorm = norm(g);
  } catch (const NonFiniteValue&) {
    entry_finite = false;
    f = gnorm = std::numeric_limits<double>::quiet_NaN();
  }
  traj.recorded.push_back({0, x, f, gnorm});
  if (!entry_finite) {
    traj.termination = Termination::Diverged;
    traj.nonfinite = true;
    return traj;
  }

  // Incremental per-coordinate cycle tracking, equivalent to running
  // detect_cycle over a sliding window of cycle_window + 2 iterates.
  const double cycle_guard = 10.0 * opt.cycle_tolerance;
  std::vector<std::size_t> cycle_streak(n, 0);
  Vector back2, back1 = x;

  TrajectorySample prev_sample{0, x, f, gnorm};
  double step_norm = std::numeric_limits<double>::infinity();

  auto record = [&](std::size_t k) {
    traj.recorded.push_back({k, x, f, gnorm});
  };

  for (std::size_t k = 1; k <= opt.budget; ++k) {
    for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] - map.alpha * g[i];
    traj.iterations = k;

    bool finite = all_finite(x_new);
    double f_new = 0, gnorm_new = 0;
    if (finite) {
      try {
        f_new = map.field.value(x_new);
        map.field.gradient_into(x_new, g);
        gnorm_new = norm(g);
      } catch (const NonFiniteValue&) {
        finite = false;
      }
    }
    if (!finite) {
      prev_sample = {k - 1, x, f, gnorm};
      traj.termination = Termination::Diverged;
      traj.nonfinite = true;
      x = x_new;
      f = gnorm = std::numeric_limits<double>::quiet_NaN();
      record(k);
      break;
    }

    step_norm = distance(x_new, x);
    prev_sample = {k - 1, x, f, gnorm};
    back2 = std::move(back1);
    back1 = x;
    x = x_new;
    f = f_new;
    gnorm = gnorm_new;

    if (k % stride == 0) record(k);

    if (gnorm <= opt.grad_tolerance && step_norm <= opt.step_tolerance) {
      traj.termination = Termination::Converged;
      traj.limit = x;
      break;
    }
    if (norm(x) > opt.divergence_radius || f < opt.divergence_value) {
      traj.termination = Termination::Diverged;
      break;
    }
    if (domain && !domain->contains_closed(x)) {
      traj.termination = Termination::ExitedDomain;
      traj.exit_step = k;
      break;
    }
    if (k >= 2) {
      bool certified = false;
      for (std::size_t c = 0; c < n; ++c) {
        const double two_apart = std::abs(x[c] - back2[c]);
        const double one_apart = std::abs(back1[c] - back2[c]);
        if (two_apart <= opt.cycle_tolerance && one_apart > cycle_guard) {
          if (++cycle_streak[c] >= opt.cycle_window) certified = true;
        } else {
          cycle_streak[c] = 0;
        }
      }
      if (certified) {
        CycleCertificate cert;
        for (std::size_t c = 0; c < n; ++c)
          if (cycle_streak[c] >= opt.cycle_window) cert.coordinates.push_back(c);
        cert.first = back1;
        cert.second = x;
        cert.detected_at = k;
        traj.termination = Termination::Cycling;
        traj.cycle = std::move(cert);
        break;
      }
    }
    if (k == opt.budget) {
      traj.termination = Termination::BudgetExhausted;
      traj.non_convergent = step_norm > 10.0 * opt.cycle_tolerance;
    }
  }

  traj.final_gradient_norm = gnorm;
  traj.final_value = f;

  // Ensure the last two iterates are recorded (replayability of the tail).
  auto already = [&](std::size_t k) {
    for (auto it = traj.recorded.rbegin(); it != traj.recorded.rend(); ++it)
      if (it->iteration == k) return true;
    return false;
  };
  if (traj.iterations >= 1 && !already(traj.iterations - 1)) {
    // insert before the final sample if that one is present
    TrajectorySample s{traj.iterations - 1, prev_sample.point, prev_sample.value,
                       prev_sample.gradient_norm};
    if (already(traj.iterations))
      traj.recorded.insert(traj.recorded.end() - 1, s);
    else
      traj.recorded.push_back(s);
  }
  if (!already(traj.iterations))
    traj.recorded.push_back({traj.iterations, x, f, gnorm});

  return traj;
}

/// CSV export: header "iter,x1,...,xN,f,gradnorm", one row per recorded
/// iterate.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 std::size_t dimension) {
  os << "iter";
  for (std::size_t i = 1; i <= dimension; ++i) os << ",x" << i;
  os << ",f,gradnorm\n";
  char buf[512];
  for (const auto& s : traj.recorded) {
    os << s.iteration;
    for (double v : s.point) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", s.value, s.gradient_norm);
    os << buf << "\n";
  }
}

}  // namespace descent
