#pragma once

// Flat `key = value` run configuration with a fixed schema.
//
// Lines are `key = value`; `#` starts a comment; blank lines are ignored. Unknown or
// repeated keys are errors. Lists are comma-separated. Every error names its key.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ejko/costs.hpp"
#include "ejko/free_energy.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/jko.hpp"
#include "ejko/kramers_oracle.hpp"

namespace ejko::cli {

enum class Problem { Heat, NonlinearDiffusion, Kramers, Kolmogorov };
enum class CostKind { Weighted, Kramers, Kolmogorov };
enum class PotentialKind { Zero, Quadratic, Table };
enum class InitialKind { Gaussian, Green, Uniform, File };

struct RunConfig {
  Problem problem = Problem::Heat;

  std::vector<double> lower, upper;
  std::vector<std::size_t> counts;
  GridConvention convention = GridConvention::CellCenter;

  CostKind cost = CostKind::Weighted;
  std::vector<double> cost_A;  ///< row-major d x d
  double g_coefficient = 0.0;  ///< grad g(x) = g_coefficient x; 0 for g = 0
  int msd_order = 2;
  std::size_t block_dim = 1;

  InternalEnergy internal = InternalEnergy::boltzmann();

  PotentialKind potential = PotentialKind::Zero;
  double potential_coefficient = 1.0;
  std::vector<std::size_t> potential_axes;  ///< 0-based
  std::string potential_table;

  InitialKind initial = InitialKind::Gaussian;
  std::vector<double> initial_mean;
  double initial_variance = 0.25;
  std::string initial_file;

  double h = 0.0;
  double epsilon = 0.0;
  double horizon = 0.0;
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  KernelMode kernel = KernelMode::Dense;
  std::size_t memory_budget_mib = 1024;
  std::size_t tile_rows = 1024;
  bool log_domain = false;
  double absorption_threshold = 1e50;
  std::size_t save_every = 1;
  std::string output = "out";
  int threads = 0;

  GreenParams oracle{};

  std::size_t dim() const noexcept { return lower.size(); }
  std::size_t steps() const;
  SchemeConfig scheme() const;
};

/// Parses and validates; throws ConfigError naming the offending key.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);
/// Applies cross-field checks after command-line overrides.
void validate(const RunConfig& c);
/// Every key with its resolved value, in schema order, parseable by parse_config.
void write_resolved(std::ostream& out, const RunConfig& c);

std::string to_string(Problem p);

GridPtr make_grid(const RunConfig& c);
CostSpec make_cost(const RunConfig& c);
FreeEnergySpec make_free_energy(const RunConfig& c, const GridPtr& grid);
DiscreteMeasure make_initial(const RunConfig& c, const GridPtr& grid);

/// Whether the problem has a closed-form reference solution.
bool has_exact_solution(const RunConfig& c);
/// Reference density samples at elapsed scheme time s.
Vector exact_density_at(const RunConfig& c, const UniformGrid& grid, double s);
/// Reference time label for elapsed scheme time s (t0 + s for Kramers, s otherwise).
double reference_time(const RunConfig& c, double s);

}  // namespace ejko::cli
