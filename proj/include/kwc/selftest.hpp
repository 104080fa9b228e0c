#pragma once

// Seeded randomized property suites: exterior-algebra identities, rotation
// conversions, model-function derivatives and the energy gradient check.

#include <cstdint>
#include <string>
#include <vector>

namespace kwc::selftest {

struct PropertyResult {
  std::string name;
  long cases = 0;
  long failures = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  /// Inputs and residual of the first few failing cases.
  std::vector<std::string> failure_log;

  bool pass() const { return failures == 0; }
};

struct SuiteResult {
  std::string name;
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  long cases() const;
  long failures() const;
  bool pass() const { return failures() == 0; }
};

/// exterior, rotrep, model, grad
const std::vector<std::string>& suite_names();

struct SuiteOptions {
  std::uint64_t seed = 20240501;
  int exterior_cases = 10000;  // per identity
  int rotation_cases = 1000;
  int grad_states = 20;
};

/// Throws std::invalid_argument for an unknown suite name.
SuiteResult run_suite(const std::string& name, const SuiteOptions& opts = {});

}  // namespace kwc::selftest
