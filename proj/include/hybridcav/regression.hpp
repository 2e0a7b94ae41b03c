#ifndef HYBRIDCAV_REGRESSION_HPP
#define HYBRIDCAV_REGRESSION_HPP

// Reference-number checks run against a workbench configuration. Each check
// recomputes its quantity from the config, so perturbing one input only trips
// the checks that depend on it.

#include <cstdint>
#include <string>
#include <vector>

#include "hybridcav/config.hpp"

namespace hybridcav {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;  // human-readable value(s)
  std::string expected;
  std::string detail;
};

struct RegressionOptions {
  int geometry_trials = 20;
  std::size_t monte_carlo_samples = 200000;
  std::uint64_t seed = 1;
};

std::vector<CheckResult> run_regression(const WorkbenchConfig& config, const RegressionOptions& options = {});

// 0 when everything passed, otherwise 10 + number of failures, capped at 125.
int regression_exit_code(const std::vector<CheckResult>& results);

} // namespace hybridcav

#endif // HYBRIDCAV_REGRESSION_HPP
