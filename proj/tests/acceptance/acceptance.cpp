// Runs the twelve acceptance criteria; exits nonzero if any fails.

#include <algorithm>
#include <cstdio>
#include <string>

#include "homoshear/harness.hpp"

int main(int argc, char** argv) {
  homoshear::AcceptanceOptions opt;
  if (argc > 1) opt.work_dir = argv[1];
  const auto results = homoshear::run_acceptance(opt);
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
  std::printf("%zu criteria, %ld failed\n", results.size(), static_cast<long>(failed));
  return failed == 0 ? 0 : 1;
}
