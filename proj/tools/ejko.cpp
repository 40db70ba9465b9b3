#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "checks.hpp"
#include "ejko/cli/config.hpp"
#include "ejko/cli/runner.hpp"

namespace {

using namespace ejko::cli;

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool log_domain = false;
  bool dense = false;
  bool matrix_free = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_out) {
  app->add_option("--config", f.config, "run configuration file")->required()->check(CLI::ExistingFile);
  if (with_out) app->add_option("--out", f.out, "output location");
  app->add_option("--threads", f.threads, "worker threads, 0 = auto")->check(CLI::NonNegativeNumber);
  app->add_flag("--log-domain", f.log_domain, "enable log-domain stabilization");
  auto* d = app->add_flag("--dense", f.dense, "dense kernel");
  auto* m = app->add_flag("--matrix-free", f.matrix_free, "matrix-free kernel");
  d->excludes(m);
}

RunConfig load(const CommonFlags& f, bool out_is_dir) {
  RunConfig c = parse_config_file(f.config);
  if (f.out && out_is_dir) c.output = *f.out;
  if (f.threads) c.threads = *f.threads;
  if (f.log_domain) c.log_domain = true;
  if (f.dense) c.kernel = ejko::KernelMode::Dense;
  if (f.matrix_free) c.kernel = ejko::KernelMode::MatrixFree;
  validate(c);
  return c;
}

int run_checks(bool all) {
  using namespace ejko::checks;
  std::vector<CheckResult (*)()> fast = {matrix_identities, cost_cross_validation, green_function_identities,
                                         prox_correctness,  entropic_ot,           step_optimality};
  std::vector<CheckResult> results;
  auto report = [&](CheckResult r) {
    std::cout << format_line(r) << std::endl;
    results.push_back(std::move(r));
  };
  for (auto fn : fast) report(fn());
  if (all) {
    report(heat_equation());
    report(kramers_desk());
  }
  report(dense_matrix_free());
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic JKO solver for drift-diffusion equations"};
  app.require_subcommand(1);

  CommonFlags solve_f, exact_f, error_f, ot_f, cost_f;
  double exact_time = 0.0;
  std::string run_dir, mu_path, nu_path;
  std::optional<std::string> plan_path;
  bool check_all = false;

  auto* solve = app.add_subcommand("solve", "run the scheme and write trace, states and errors");
  add_common(solve, solve_f, true);

  auto* exact = app.add_subcommand("exact", "write the reference solution at elapsed time --time");
  add_common(exact, exact_f, true);
  exact->add_option("--time", exact_time, "elapsed scheme time")->required();

  auto* error = app.add_subcommand("error", "L1 error of every saved state against the reference");
  add_common(error, error_f, true);
  error->add_option("--run", run_dir, "directory written by solve")->required()->check(CLI::ExistingDirectory);

  auto* ot = app.add_subcommand("ot", "entropic optimal transport");
  auto* ot_solve = ot->add_subcommand("solve", "solve between two measure CSVs");
  ot->require_subcommand(1);
  add_common(ot_solve, ot_f, false);
  ot_solve->add_option("--mu", mu_path, "source measure CSV")->required()->check(CLI::ExistingFile);
  ot_solve->add_option("--nu", nu_path, "target measure CSV")->required()->check(CLI::ExistingFile);
  ot_solve->add_option("--plan", plan_path, "write the dense plan CSV");

  auto* cost = app.add_subcommand("cost", "cost matrix tools");
  auto* cost_dump = cost->add_subcommand("dump", "write the dense cost matrix CSV");
  cost->require_subcommand(1);
  add_common(cost_dump, cost_f, true);

  auto* check = app.add_subcommand("check", "run the self-tests and print a pass/fail table");
  check->add_flag("--all", check_all, "include the end-to-end heat and Kramers runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) return run_solve(load(solve_f, true), std::cout);
    if (*exact) {
      write_exact(load(exact_f, false), exact_time, exact_f.out.value_or("exact.csv"));
      return kOk;
    }
    if (*error) {
      write_error_table(load(error_f, false), run_dir, error_f.out.value_or(run_dir + "/error_recomputed.csv"));
      return kOk;
    }
    if (*ot_solve) {
      write_ot_summary(std::cout, run_ot(load(ot_f, false), mu_path, nu_path, plan_path));
      return kOk;
    }
    if (*cost_dump) {
      write_cost_dump(load(cost_f, false), cost_f.out.value_or("cost.csv"));
      return kOk;
    }
    if (*check) return run_checks(check_all);
  } catch (const OutputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOutputFailure;
  } catch (const ejko::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const ejko::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kUsage;
}
