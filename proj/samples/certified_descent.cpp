// End-to-end walkthrough: bound the Hessian over a box, plan a step size,
// certify forward invariance, then follow one trajectory.

#include <iostream>

#include "descent/descent.hpp"

using namespace descent;

int main() {
  const Builtin well = builtin("double-well");
  const BoxDomain& box = well.reference_domain;

  const auto l = estimate_hessian_sup(well.field, box, {41, 81}, 3);
  std::cout << "sup |Hessian| over " << format_box(box) << " (grid lower bound): "
            << l.value << "\n";

  const StepSizePlan plan = plan_stepsize(l.value, 11.0 / 12.0);
  std::cout << "planned alpha = " << plan.alpha_sufficient << "\n";

  const GDMap map(well.field, plan.alpha_sufficient);
  const auto verdict =
      check_forward_invariance(map, box, InvarianceMode::SeparableCertify, 100001);
  std::cout << "invariance: " << to_string(verdict.kind) << " (worst margin "
            << verdict.worst_margin << ")\n";

  const Trajectory traj = iterate(map, Vector{0.5, 0.5});
  std::cout << "trajectory from (0.5, 0.5): " << to_string(traj.termination) << " in "
            << traj.iterations << " iterations";
  if (traj.limit)
    std::cout << " at (" << (*traj.limit)[0] << ", " << (*traj.limit)[1] << ")";
  std::cout << "\n";

  const CriticalPointRecord rec = classify(well.field, *traj.limit);
  std::cout << "limit classifies as " << to_string(rec.cls) << " (lambda_min "
            << rec.lambda_min << ")\n";
  return 0;
}
