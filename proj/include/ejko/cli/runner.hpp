#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "ejko/cli/config.hpp"
#include "ejko/error.hpp"

namespace ejko::cli {

/// The output location cannot be created or written.
class OutputError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kOk = 0, kUsage = 1, kSolverFailure = 2, kOutputFailure = 3 };

/// Creates `dir` if needed and checks that files can be written into it. On failure
/// nothing is left behind and OutputError is thrown.
void prepare_output_dir(const std::string& dir);

/// Runs the scheme and writes trace.csv, state_<n>.csv, config.resolved and, when a
/// reference solution exists, error.csv into `c.output`.
int run_solve(const RunConfig& c, std::ostream& log);

/// Writes the reference solution at elapsed scheme time `s` as a measure CSV.
void write_exact(const RunConfig& c, double s, const std::string& path);

/// Compares every state_<n>.csv in `run_dir` with the reference solution.
void write_error_table(const RunConfig& c, const std::string& run_dir, const std::string& path);

struct OtSummary {
  double objective = 0.0;
  double transport_cost = 0.0;
  double row_residual = 0.0;
  double col_residual = 0.0;
  std::size_t iterations = 0;
  std::size_t absorptions = 0;
  bool converged = false;
};

/// Entropic OT between two measure CSVs on the configured grid, cost and epsilon.
OtSummary run_ot(const RunConfig& c, const std::string& mu_path, const std::string& nu_path,
                 const std::optional<std::string>& plan_path);
void write_ot_summary(std::ostream& out, const OtSummary& s);

/// Dense cost matrix as `row,col,value` CSV; refuses grids with more than 2000 points.
void write_cost_dump(const RunConfig& c, const std::string& path);

inline constexpr std::size_t kMaxDumpPoints = 2000;

}  // namespace ejko::cli
