#pragma once

// Built-in consistency checks run by `adn selfcheck`: 64-bit central
// finite differences against every differentiable op, and the projector
// adjoint identity.

#include <string>
#include <vector>

namespace adn {

struct CheckResult {
  std::string name;
  bool passed = false;
  double error = 0.0;
  double tolerance = 0.0;
};

std::vector<CheckResult> run_selfcheck();

}  // namespace adn
