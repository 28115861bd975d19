// Criterion 2: analytic gradients of every loss agree with central
// differences to relative error 1e-4 on at least 100 configurations each,
// with every hinge at least 1e-3 from its kink, within 2 minutes.

#include "dcm/oracles.hpp"
#include "harness.hpp"

#include <iostream>

using namespace dcm;

int main() {
  constexpr int kConfigs = 100;
  acceptance::Checker checker;
  const acceptance::Stopwatch clock;
  const auto results = oracle::gradient_checks(kConfigs, 2024);
  const double secs = clock.seconds();
  bool all = results.size() == 7;
  for (const auto& r : results) all &= r.passed;
  oracle::report(results, std::cout);
  checker.check("gradient relative error <= 1e-4", all,
                std::to_string(results.size()) + " losses x " + std::to_string(kConfigs) + " configs");
  checker.check("gradient suite under 120 s", secs < 120.0, acceptance::fmt("%.3f s", secs));
  return checker.exit_code();
}
