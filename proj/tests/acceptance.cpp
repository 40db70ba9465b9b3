// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
//
//   acceptance                    all nine criteria
//   acceptance --only <id>        one criterion
//   acceptance --full-resolution  Kramers at 200x130, matrix-free (mass and ordering only)

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "checks.hpp"

namespace {

using namespace ejko::checks;

CheckResult run(int id) {
  switch (id) {
    case 1: return matrix_identities();
    case 2: return cost_cross_validation();
    case 3: return green_function_identities();
    case 4: return prox_correctness();
    case 5: return entropic_ot();
    case 6: return step_optimality();
    case 7: return heat_equation();
    case 8: return kramers_desk();
    case 9: return dense_matrix_free();
    default: break;
  }
  CheckResult r;
  r.id = id;
  r.title = "unknown criterion";
  return r;
}

CheckResult full_resolution() {
  return detail::timed(8, "Kramers full resolution 200x130", [](CheckResult& r) {
    const double eps[3] = {0.05, 0.09, 0.5};
    KramersOutcome o[3];
    for (int k = 0; k < 3; ++k) {
      o[k] = kramers_run(eps[k], 200, 130, ejko::KernelMode::MatrixFree);
      std::cout << "  eps " << eps[k] << ": error at t=0.2 " << detail::fmt(o[k].error_at_02) << std::endl;
    }
    bool mass = true;
    for (const auto& x : o) mass = mass && x.completed && x.max_mass_error <= 1e-8;
    const bool ordered = o[0].error_at_02 <= o[1].error_at_02 && o[1].error_at_02 <= o[2].error_at_02;
    r.passed = mass && ordered;
    r.detail = std::string("mass ") + (mass ? "ok" : "FAILED") + ", ordering " + (ordered ? "ok" : "FAILED");
  });
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> ids;
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      ids.push_back(std::atoi(argv[++i]));
    } else if (std::strcmp(argv[i], "--full-resolution") == 0) {
      full = true;
    } else {
      std::cerr << "usage: acceptance [--only <id>]... [--full-resolution]\n";
      return 2;
    }
  }
  std::vector<CheckResult> results;
  if (full) {
    results.push_back(full_resolution());
  } else {
    if (ids.empty())
      for (int id = 1; id <= 9; ++id) ids.push_back(id);
    for (int id : ids) {
      results.push_back(run(id));
      std::cout << format_line(results.back()) << std::endl;
    }
  }
  if (full) std::cout << format_line(results.back()) << std::endl;
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  return failed == 0 ? 0 : 1;
}
