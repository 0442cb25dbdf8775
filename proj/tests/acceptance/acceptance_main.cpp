// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

#include <iostream>

#include "acceptance/criteria.hpp"

int main() {
  const auto results = pqlab::acceptance::run_all(std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
