// Criterion 1: every loss matches its hand-computed value to 1e-6, and the
// suite finishes within 5 seconds.

#include "dcm/oracles.hpp"
#include "harness.hpp"

#include <iostream>

using namespace dcm;

int main() {
  acceptance::Checker checker;
  const acceptance::Stopwatch clock;
  const auto results = oracle::loss_value_checks();
  const double secs = clock.seconds();
  bool all = !results.empty();
  for (const auto& r : results) all &= r.passed;
  oracle::report(results, std::cout);
  checker.check("hand-computed loss values within 1e-6", all,
                std::to_string(results.size()) + " examples");
  checker.check("loss value suite under 5 s", secs < 5.0, acceptance::fmt("%.3f s", secs));
  return checker.exit_code();
}
