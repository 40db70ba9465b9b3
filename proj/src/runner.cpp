#include "ejko/cli/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <system_error>
#include <vector>

#ifdef EJKO_HAS_OPENMP
#include <omp.h>
#endif

#include "ejko/entropic_ot.hpp"
#include "ejko/jko.hpp"
#include "ejko/kernel.hpp"
#include "ejko/numerics.hpp"

namespace ejko::cli {
namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot write '" + p.string() + "'");
  return out;
}

void write_state(const fs::path& dir, std::size_t n, const DiscreteMeasure& mu) {
  auto out = open_output(dir / ("state_" + std::to_string(n) + ".csv"));
  write_measure_csv(out, mu);
  if (!out) throw OutputError("write failed for state " + std::to_string(n));
}

void apply_threads(int threads) {
#ifdef EJKO_HAS_OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

std::string field(double x) { return std::isfinite(x) ? format_double(x) : std::string(); }

}  // namespace

void prepare_output_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  const bool existed = fs::exists(p, ec);
  if (!existed) {
    fs::create_directories(p, ec);
    if (ec) throw OutputError("cannot create output directory '" + dir + "': " + ec.message());
  } else if (!fs::is_directory(p, ec)) {
    throw OutputError("output path '" + dir + "' exists and is not a directory");
  }
  const fs::path probe = p / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "x") || !(out.flush())) {
      out.close();
      fs::remove(probe, ec);
      if (!existed) fs::remove(p, ec);
      throw OutputError("output directory '" + dir + "' is not writable");
    }
  }
  fs::remove(probe, ec);
}

int run_solve(const RunConfig& c, std::ostream& log) {
  validate(c);
  apply_threads(c.threads);

  const GridPtr grid = make_grid(c);
  const CostSpec cost = make_cost(c);
  const FreeEnergySpec spec = make_free_energy(c, grid);
  const DiscreteMeasure rho0 = make_initial(c, grid);
  const SchemeConfig scheme = c.scheme();
  const std::size_t n_steps = scheme.steps();
  const double ratio = scheme.ratio();

  log << "problem " << to_string(c.problem) << ": M = " << grid->size() << ", N = " << n_steps
      << ", kappa = 2h/eps = " << format_double(2.0 * c.h / c.epsilon) << "\n";
  log << "scaling ratio eps|log eps|/h^2 = " << format_double(ratio) << "\n";
  if (ratio > 1.0) log << "warning: scaling ratio exceeds 1\n";

  // The kernel is built before any file is written, so a memory-budget failure leaves
  // the output directory untouched.
  KernelOperator kernel = gibbs_kernel(cost, *grid, c.epsilon, scheme.kernel);

  prepare_output_dir(c.output);
  const fs::path dir(c.output);
  {
    auto out = open_output(dir / "config.resolved");
    write_resolved(out, c);
  }

  const bool exact = has_exact_solution(c);
  auto trace = open_output(dir / "trace.csv");
  trace << "step,time,free_energy,entropy,second_moment,transport_objective,inner_iters,residual\n";
  std::ofstream errors;
  if (exact) {
    errors = open_output(dir / "error.csv");
    errors << "step,time,reference_time,l1_error\n";
  }

  auto record = [&](std::size_t n, const SchemeRun& run) {
    const double t = static_cast<double>(n) * c.h;
    trace << n << ',' << format_double(t) << ',' << format_double(run.free_energy[n]) << ','
          << format_double(run.entropy[n]) << ',' << format_double(run.second_moment[n]) << ',';
    if (n == 0)
      trace << ",,";
    else
      trace << field(run.steps[n - 1].transport_objective) << ',' << run.steps[n - 1].inner_iterations << ','
            << format_double(run.steps[n - 1].residual);
    trace << '\n';
    trace.flush();
    if (exact) {
      const double err = l1_distance_to_density(run.iterates[n], exact_density_at(c, *grid, t));
      errors << n << ',' << format_double(t) << ',' << format_double(reference_time(c, t)) << ','
             << format_double(err) << '\n';
      errors.flush();
    }
    const bool save = n == 0 || n == n_steps || (c.save_every > 0 && n % c.save_every == 0);
    if (save) write_state(dir, n, run.iterates[n]);
    log << "step " << n << "/" << n_steps;
    if (n > 0)
      log << ": inner " << run.steps[n - 1].inner_iterations << ", residual "
          << format_double(run.steps[n - 1].residual) << ", absorptions " << run.steps[n - 1].absorptions;
    log << "\n";
  };

  SchemeRun run;
  run.h = c.h;
  run.epsilon = c.epsilon;
  run.iterates.push_back(rho0);
  run.free_energy.push_back(discrete_free_energy(spec, rho0));
  run.entropy.push_back(discrete_entropy(rho0));
  run.second_moment.push_back(second_moment(rho0));
  record(0, run);

  run = run_scheme(rho0, kernel, spec, scheme, record);
  if (!trace || (exact && !errors)) throw OutputError("write failed in '" + c.output + "'");
  if (!run.ok()) {
    log << "error: step " << *run.failed_step << " failed: " << run.failure << "\n";
    return kSolverFailure;
  }
  log << "done: " << n_steps << " steps written to " << c.output << "\n";
  return kOk;
}

void write_exact(const RunConfig& c, double s, const std::string& path) {
  if (!(s >= 0.0)) throw InvalidArgument("exact: elapsed time must be nonnegative");
  const GridPtr grid = make_grid(c);
  const DiscreteMeasure mu = DiscreteMeasure::from_density(grid, exact_density_at(c, *grid, s));
  auto out = open_output(path);
  write_measure_csv(out, mu);
}

void write_error_table(const RunConfig& c, const std::string& run_dir, const std::string& path) {
  const GridPtr grid = make_grid(c);
  std::vector<std::size_t> steps;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("state_", 0) != 0 || entry.path().extension() != ".csv") continue;
    const std::string digits = name.substr(6, name.size() - 10);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
    steps.push_back(static_cast<std::size_t>(std::stoull(digits)));
  }
  if (steps.empty()) throw InvalidArgument("no state_<n>.csv files in '" + run_dir + "'");
  std::sort(steps.begin(), steps.end());

  std::vector<std::string> rows;
  for (auto n : steps) {
    std::ifstream in(fs::path(run_dir) / ("state_" + std::to_string(n) + ".csv"));
    const DiscreteMeasure mu = read_measure_csv(in, grid);
    const double t = static_cast<double>(n) * c.h;
    const double err = l1_distance_to_density(mu, exact_density_at(c, *grid, t));
    rows.push_back(std::to_string(n) + ',' + format_double(t) + ',' + format_double(reference_time(c, t)) + ',' +
                   format_double(err));
  }
  auto out = open_output(path);
  out << "step,time,reference_time,l1_error\n";
  for (const auto& r : rows) out << r << '\n';
}

OtSummary run_ot(const RunConfig& c, const std::string& mu_path, const std::string& nu_path,
                 const std::optional<std::string>& plan_path) {
  apply_threads(c.threads);
  const GridPtr grid = make_grid(c);
  std::ifstream mu_in(mu_path), nu_in(nu_path);
  if (!mu_in) throw InvalidArgument("cannot open '" + mu_path + "'");
  if (!nu_in) throw InvalidArgument("cannot open '" + nu_path + "'");
  const DiscreteMeasure mu = read_measure_csv(mu_in, grid);
  const DiscreteMeasure nu = read_measure_csv(nu_in, grid);
  const SchemeConfig scheme = c.scheme();
  if (plan_path && grid->size() > kMaxDumpPoints)
    throw InvalidArgument("dense plan output is limited to " + std::to_string(kMaxDumpPoints) + " points");

  KernelOperator k = gibbs_kernel(make_cost(c), *grid, c.epsilon, scheme.kernel);
  const SinkhornResult r = sinkhorn(k, mu, nu, scheme.scaling);
  OtSummary s;
  const CostTable& costs = *k.costs();
  s.objective = regularized_cost(r.plan, costs, c.epsilon, grid->tile_volume());
  s.transport_cost = transport_cost(r.plan, costs);
  s.row_residual = (r.plan.row_sums() - mu.weights()).cwiseAbs().sum();
  s.col_residual = (r.plan.col_sums() - nu.weights()).cwiseAbs().sum();
  s.iterations = r.state.iterations;
  s.absorptions = r.state.absorptions;
  s.converged = r.state.converged;
  if (plan_path) {
    auto out = open_output(*plan_path);
    out << "row,col,value\n";
    for (std::size_t i = 0; i < grid->size(); ++i)
      for (std::size_t j = 0; j < grid->size(); ++j) out << i << ',' << j << ',' << format_double(r.plan.entry(i, j)) << '\n';
  }
  return s;
}

void write_ot_summary(std::ostream& out, const OtSummary& s) {
  out << "objective = " << format_double(s.objective) << "\n";
  out << "transport_cost = " << format_double(s.transport_cost) << "\n";
  out << "row_residual = " << format_double(s.row_residual) << "\n";
  out << "col_residual = " << format_double(s.col_residual) << "\n";
  out << "iterations = " << s.iterations << "\n";
  out << "absorptions = " << s.absorptions << "\n";
  out << "converged = " << (s.converged ? "true" : "false") << "\n";
}

void write_cost_dump(const RunConfig& c, const std::string& path) {
  const GridPtr grid = make_grid(c);
  if (grid->size() > kMaxDumpPoints)
    throw InvalidArgument("cost dump is limited to " + std::to_string(kMaxDumpPoints) + " points, grid has " +
                          std::to_string(grid->size()));
  const CostTable table(make_cost(c), *grid);
  auto out = open_output(path);
  out << "row,col,value\n";
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < table.size(); ++j) out << i << ',' << j << ',' << format_double(table(i, j)) << '\n';
}

}  // namespace ejko::cli
