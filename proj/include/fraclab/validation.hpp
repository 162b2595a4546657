#pragma once

#include <string>
#include <vector>

namespace fraclab {

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  double margin = 0.0;  // how far inside (positive) or outside the tolerance
  std::string detail;
};

struct ValidationOptions {
  std::string only_group;  // empty = all
  int gasket_level = 8;
  int gasket_walkers = 100000;
  int jobs = 1;
  // Exploration knob surfaced for sanity experiments: scaling the FFPE drift
  // (e.g. -1 flips it uphill, which must break the steady-state check).
  double steady_state_drift_scale = 1.0;
};

std::vector<CheckResult> check_gradients(int cases = 30);
std::vector<CheckResult> check_caputo();
std::vector<CheckResult> check_steady_state(double drift_scale = 1.0);
std::vector<CheckResult> check_posterior_identity();
std::vector<CheckResult> check_llc_toys();
std::vector<CheckResult> check_fractal_bench(int level, int walkers, int jobs);

std::vector<CheckResult> run_validation(const ValidationOptions& opts);

}  // namespace fraclab
