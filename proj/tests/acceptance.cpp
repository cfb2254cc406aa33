// Runs the twelve acceptance criteria and prints one line per criterion.
// Usage: csgd_acceptance [id ...]

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "csgd/suite.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    ids.push_back(std::atoi(argv[i]));
  }
  csgd::SuiteOptions opt;
  int failed = 0;
  csgd::run_suite(opt, ids, [&](const csgd::CriterionResult& r) {
    std::printf("%s\n", csgd::format_result(r).c_str());
    std::fflush(stdout);
    failed += r.passed() ? 0 : 1;
  });
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
