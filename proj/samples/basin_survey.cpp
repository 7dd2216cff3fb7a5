// Small Monte Carlo survey of the double-well basins, printed as JSON.

#include <iostream>

#include "descent/descent.hpp"

using namespace descent;

int main() {
  ExperimentConfig cfg;
  cfg.field.builtin_name = "double-well";
  cfg.domain = BoxDomain({{-1.0, 1.0}, {-2.0, 2.0}});
  cfg.alpha = 1.0 / 12.0;
  cfg.trials = 2000;
  cfg.master_seed = 1;
  cfg.invariance_certified = true;

  const ExperimentReport report = run_experiment(cfg);
  std::cout << to_json(report).dump(2) << "\n";
  return 0;
}
