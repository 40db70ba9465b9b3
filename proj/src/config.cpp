#include "ejko/cli/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "ejko/error.hpp"
#include "ejko/numerics.hpp"

namespace ejko::cli {
namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "problem",        "grid.lower",          "grid.upper",        "grid.counts",     "grid.convention",
      "cost",           "cost.A",              "cost.g",            "cost.g_coefficient", "cost.n",
      "cost.block_dim", "internal",            "internal.m",        "potential",       "potential.coefficient",
      "potential.axes", "potential.table",     "initial",           "initial.mean",    "initial.variance",
      "initial.file",   "h",                   "epsilon",           "T",               "tol",
      "max_iter",       "kernel",              "kernel.memory_budget_mib", "kernel.tile_rows", "log_domain",
      "absorption_threshold", "save_every",   "output",            "threads",         "oracle.x0",
      "oracle.v0",      "oracle.t0"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Entries {
 public:
  void add(const std::string& key, const std::string& value) {
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end())
      throw ConfigError(key, "unknown key");
    if (!map_.emplace(key, value).second) throw ConfigError(key, "given more than once");
  }
  bool has(const std::string& key) const { return map_.count(key) != 0; }
  const std::string& raw(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw ConfigError(key, "missing required key");
    return it->second;
  }

  double real(const std::string& key) const { return to_real(key, raw(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  long long integer(const std::string& key) const { return to_integer(key, raw(key)); }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!has(key)) return fallback;
    return to_count(key, raw(key));
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected a boolean (true/false), got '" + v + "'");
  }

  std::string choice(const std::string& key, const std::vector<std::string>& options,
                     const std::string& fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      throw ConfigError(key, "expected one of {" + list + "}, got '" + v + "'");
    }
    return v;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(key, raw(key))) out.push_back(to_real(key, item));
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split(key, raw(key))) out.push_back(to_count(key, item));
    return out;
  }

  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? raw(key) : fallback; }

 private:
  static std::vector<std::string> split(const std::string& key, const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (out.empty() || std::any_of(out.begin(), out.end(), [](const std::string& s) { return s.empty(); }))
      throw ConfigError(key, "expected a comma-separated list, got '" + v + "'");
    return out;
  }

  static double to_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
      throw ConfigError(key, "expected a finite real number, got '" + v + "'");
    return x;
  }

  static long long to_integer(const std::string& key, const std::string& v) {
    char* end = nullptr;
    errno = 0;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
      throw ConfigError(key, "expected an integer, got '" + v + "'");
    return x;
  }

  static std::size_t to_count(const std::string& key, const std::string& v) {
    const long long x = to_integer(key, v);
    if (x < 0) throw ConfigError(key, "must be nonnegative, got " + v);
    return static_cast<std::size_t>(x);
  }

  std::map<std::string, std::string> map_;
};

template <typename T>
std::string join(const std::vector<T>& v, std::size_t offset = 0) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i] + offset);
  }
  return out;
}

Problem problem_from(const std::string& s) {
  if (s == "heat") return Problem::Heat;
  if (s == "nonlinear_diffusion") return Problem::NonlinearDiffusion;
  if (s == "kramers") return Problem::Kramers;
  return Problem::Kolmogorov;
}

const char* cost_name(CostKind k) {
  switch (k) {
    case CostKind::Weighted: return "weighted";
    case CostKind::Kramers: return "kramers";
    case CostKind::Kolmogorov: return "kolmogorov";
  }
  return "";
}

const char* potential_name(PotentialKind k) {
  switch (k) {
    case PotentialKind::Zero: return "zero";
    case PotentialKind::Quadratic: return "quadratic";
    case PotentialKind::Table: return "table";
  }
  return "";
}

const char* initial_name(InitialKind k) {
  switch (k) {
    case InitialKind::Gaussian: return "gaussian";
    case InitialKind::Green: return "green";
    case InitialKind::Uniform: return "uniform";
    case InitialKind::File: return "file";
  }
  return "";
}

Matrix matrix_from(const std::vector<double>& a, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(Eigen::Index(i), Eigen::Index(j)) = a[i * d + j];
  return m;
}

}  // namespace

std::string to_string(Problem p) {
  switch (p) {
    case Problem::Heat: return "heat";
    case Problem::NonlinearDiffusion: return "nonlinear_diffusion";
    case Problem::Kramers: return "kramers";
    case Problem::Kolmogorov: return "kolmogorov";
  }
  return "";
}

std::size_t RunConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / h)); }

SchemeConfig RunConfig::scheme() const {
  SchemeConfig s;
  s.h = h;
  s.epsilon = epsilon;
  s.horizon = horizon;
  s.scaling.tol = tol;
  s.scaling.max_iter = max_iter;
  s.scaling.log_domain = log_domain;
  s.scaling.absorption_threshold = absorption_threshold;
  s.kernel.mode = kernel;
  s.kernel.dense_memory_budget = memory_budget_mib * (std::size_t{1} << 20);
  s.kernel.tile_rows = tile_rows;
  return s;
}

RunConfig parse_config(std::istream& in) {
  Entries e;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ConfigError(key, "empty value");
    e.add(key, value);
  }

  RunConfig c;
  c.problem = problem_from(e.choice("problem", {"heat", "nonlinear_diffusion", "kramers", "kolmogorov"}, e.raw("problem")));
  const bool kramers = c.problem == Problem::Kramers;

  c.lower = e.reals("grid.lower");
  c.upper = e.reals("grid.upper");
  c.counts = e.counts("grid.counts");
  c.convention = e.choice("grid.convention", {"center", "endpoint"}, "center") == "center" ? GridConvention::CellCenter
                                                                                           : GridConvention::Endpoint;
  if (c.upper.size() != c.lower.size()) throw ConfigError("grid.upper", "length differs from grid.lower");
  if (c.counts.size() != c.lower.size()) throw ConfigError("grid.counts", "length differs from grid.lower");
  const std::size_t d = c.dim();
  for (std::size_t a = 0; a < d; ++a) {
    if (!(c.upper[a] > c.lower[a])) throw ConfigError("grid.upper", "must exceed grid.lower on every axis");
    if (c.counts[a] < 2) throw ConfigError("grid.counts", "every axis needs at least 2 points");
  }

  const std::string default_cost =
      kramers ? "kramers" : (c.problem == Problem::Kolmogorov ? "kolmogorov" : "weighted");
  const std::string cost = e.choice("cost", {"weighted", "kramers", "kolmogorov"}, default_cost);
  c.cost = cost == "weighted" ? CostKind::Weighted : (cost == "kramers" ? CostKind::Kramers : CostKind::Kolmogorov);
  if (e.has("cost.A")) {
    c.cost_A = e.reals("cost.A");
    if (c.cost_A.size() != d * d) throw ConfigError("cost.A", "expected " + std::to_string(d * d) + " entries");
  } else {
    c.cost_A.assign(d * d, 0.0);
    for (std::size_t a = 0; a < d; ++a) c.cost_A[a * d + a] = 1.0;
  }
  const std::string g = e.choice("cost.g", {"zero", "quadratic"}, "zero");
  c.g_coefficient = g == "zero" ? 0.0 : e.real("cost.g_coefficient", 1.0);
  if (g == "zero" && e.has("cost.g_coefficient")) throw ConfigError("cost.g_coefficient", "requires cost.g = quadratic");
  const long long n = e.integer("cost.n", 2);
  if (n < 1 || n > kMaxMsdOrder) throw ConfigError("cost.n", "must be in [1, " + std::to_string(kMaxMsdOrder) + "]");
  c.msd_order = static_cast<int>(n);
  c.block_dim = e.count("cost.block_dim", 1);
  if (c.block_dim == 0) throw ConfigError("cost.block_dim", "must be positive");

  const std::string internal =
      e.choice("internal", {"boltzmann", "power"}, c.problem == Problem::NonlinearDiffusion ? "power" : "boltzmann");
  const long long m = e.integer("internal.m", 2);
  if (internal == "power") {
    if (m < 2) throw ConfigError("internal.m", "must be an integer >= 2");
    c.internal = InternalEnergy::power_law(static_cast<int>(m));
  } else {
    if (e.has("internal.m")) throw ConfigError("internal.m", "requires internal = power");
    c.internal = InternalEnergy::boltzmann();
  }

  const std::string potential = e.choice("potential", {"zero", "quadratic", "table"}, kramers ? "quadratic" : "zero");
  c.potential = potential == "zero" ? PotentialKind::Zero
                                    : (potential == "quadratic" ? PotentialKind::Quadratic : PotentialKind::Table);
  c.potential_coefficient = e.real("potential.coefficient", 1.0);
  if (c.potential_coefficient < 0.0) throw ConfigError("potential.coefficient", "must be nonnegative");
  if (e.has("potential.axes")) {
    for (auto a : e.counts("potential.axes")) {
      if (a < 1 || a > d) throw ConfigError("potential.axes", "axes are 1-based and must not exceed the dimension");
      c.potential_axes.push_back(a - 1);
    }
  } else if (kramers && d >= 2) {
    for (std::size_t a = d / 2; a < d; ++a) c.potential_axes.push_back(a);
  } else {
    for (std::size_t a = 0; a < d; ++a) c.potential_axes.push_back(a);
  }
  c.potential_table = e.text("potential.table", "");
  if (c.potential == PotentialKind::Table && c.potential_table.empty())
    throw ConfigError("potential.table", "missing required key for potential = table");

  const std::string initial =
      e.choice("initial", {"gaussian", "green", "uniform", "file"}, kramers ? "green" : "gaussian");
  c.initial = initial == "gaussian" ? InitialKind::Gaussian
              : initial == "green"  ? InitialKind::Green
              : initial == "uniform" ? InitialKind::Uniform
                                     : InitialKind::File;
  c.initial_mean = e.has("initial.mean") ? e.reals("initial.mean") : std::vector<double>(d, 0.0);
  if (c.initial_mean.size() != d) throw ConfigError("initial.mean", "length differs from the grid dimension");
  c.initial_variance = e.real("initial.variance", 0.25);
  if (!(c.initial_variance > 0.0)) throw ConfigError("initial.variance", "must be positive");
  c.initial_file = e.text("initial.file", "");
  if (c.initial == InitialKind::File && c.initial_file.empty())
    throw ConfigError("initial.file", "missing required key for initial = file");

  c.h = e.real("h");
  if (!(c.h > 0.0)) throw ConfigError("h", "must be strictly positive");
  c.epsilon = e.real("epsilon");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon", "must be strictly positive");
  c.horizon = e.real("T");
  if (!(c.horizon >= 0.0)) throw ConfigError("T", "must be nonnegative");
  c.tol = e.real("tol", 1e-8);
  if (!(c.tol > 0.0)) throw ConfigError("tol", "must be strictly positive");
  const long long max_iter = e.integer("max_iter", 10000);
  if (max_iter < 1) throw ConfigError("max_iter", "must be positive");
  c.max_iter = static_cast<std::size_t>(max_iter);
  c.kernel = e.choice("kernel", {"dense", "matrix_free"}, "dense") == "dense" ? KernelMode::Dense : KernelMode::MatrixFree;
  c.memory_budget_mib = e.count("kernel.memory_budget_mib", 1024);
  if (c.memory_budget_mib == 0) throw ConfigError("kernel.memory_budget_mib", "must be positive");
  c.tile_rows = e.count("kernel.tile_rows", 1024);
  if (c.tile_rows == 0) throw ConfigError("kernel.tile_rows", "must be positive");
  c.log_domain = e.boolean("log_domain", false);
  c.absorption_threshold = e.real("absorption_threshold", 1e50);
  if (!(c.absorption_threshold > 1.0)) throw ConfigError("absorption_threshold", "must exceed 1");
  c.save_every = e.count("save_every", 1);
  c.output = e.text("output", "out");
  const long long threads = e.integer("threads", 0);
  if (threads < 0) throw ConfigError("threads", "must be nonnegative (0 = automatic)");
  c.threads = static_cast<int>(threads);

  c.oracle.x0 = e.real("oracle.x0", 0.0);
  c.oracle.v0 = e.real("oracle.v0", 0.0);
  c.oracle.t0 = e.real("oracle.t0", 0.14);
  if (!(c.oracle.t0 > 0.0)) throw ConfigError("oracle.t0", "must be strictly positive");

  validate(c);
  return c;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  return parse_config(in);
}

void validate(const RunConfig& c) {
  const std::size_t d = c.dim();
  const double n = std::llround(c.horizon / c.h);
  if (std::abs(n * c.h - c.horizon) > 1e-9)
    throw ConfigError("T", "must be an integer multiple of h (|N h - T| <= 1e-9)");
  if (c.cost == CostKind::Kramers && d % 2 != 0)
    throw ConfigError("cost", "kramers cost needs an even dimension (positions then velocities)");
  if (c.cost == CostKind::Kolmogorov && d != static_cast<std::size_t>(c.msd_order) * c.block_dim)
    throw ConfigError("cost.n", "cost.n * cost.block_dim must equal the grid dimension");
  if (c.cost != CostKind::Kramers && c.g_coefficient != 0.0)
    throw ConfigError("cost.g", "a force field applies to the kramers cost only");
  if (c.initial == InitialKind::Green && d != 2)
    throw ConfigError("initial", "the Green-function initial condition needs a 2D (position, velocity) grid");
  if (c.threads < 0) throw ConfigError("threads", "must be nonnegative");
}

void write_resolved(std::ostream& out, const RunConfig& c) {
  out << "problem = " << to_string(c.problem) << "\n";
  out << "grid.lower = " << join(c.lower) << "\n";
  out << "grid.upper = " << join(c.upper) << "\n";
  out << "grid.counts = " << join(c.counts) << "\n";
  out << "grid.convention = " << (c.convention == GridConvention::CellCenter ? "center" : "endpoint") << "\n";
  out << "cost = " << cost_name(c.cost) << "\n";
  out << "cost.A = " << join(c.cost_A) << "\n";
  out << "cost.g = " << (c.g_coefficient == 0.0 ? "zero" : "quadratic") << "\n";
  if (c.g_coefficient != 0.0) out << "cost.g_coefficient = " << format_double(c.g_coefficient) << "\n";
  out << "cost.n = " << c.msd_order << "\n";
  out << "cost.block_dim = " << c.block_dim << "\n";
  if (c.internal.kind() == InternalEnergy::Kind::Boltzmann) {
    out << "internal = boltzmann\n";
  } else {
    out << "internal = power\n";
    out << "internal.m = " << c.internal.exponent() << "\n";
  }
  out << "potential = " << potential_name(c.potential) << "\n";
  out << "potential.coefficient = " << format_double(c.potential_coefficient) << "\n";
  out << "potential.axes = " << join(c.potential_axes, 1) << "\n";
  if (!c.potential_table.empty()) out << "potential.table = " << c.potential_table << "\n";
  out << "initial = " << initial_name(c.initial) << "\n";
  out << "initial.mean = " << join(c.initial_mean) << "\n";
  out << "initial.variance = " << format_double(c.initial_variance) << "\n";
  if (!c.initial_file.empty()) out << "initial.file = " << c.initial_file << "\n";
  out << "h = " << format_double(c.h) << "\n";
  out << "epsilon = " << format_double(c.epsilon) << "\n";
  out << "T = " << format_double(c.horizon) << "\n";
  out << "tol = " << format_double(c.tol) << "\n";
  out << "max_iter = " << c.max_iter << "\n";
  out << "kernel = " << (c.kernel == KernelMode::Dense ? "dense" : "matrix_free") << "\n";
  out << "kernel.memory_budget_mib = " << c.memory_budget_mib << "\n";
  out << "kernel.tile_rows = " << c.tile_rows << "\n";
  out << "log_domain = " << (c.log_domain ? "true" : "false") << "\n";
  out << "absorption_threshold = " << format_double(c.absorption_threshold) << "\n";
  out << "save_every = " << c.save_every << "\n";
  out << "output = " << c.output << "\n";
  out << "threads = " << c.threads << "\n";
  out << "oracle.x0 = " << format_double(c.oracle.x0) << "\n";
  out << "oracle.v0 = " << format_double(c.oracle.v0) << "\n";
  out << "oracle.t0 = " << format_double(c.oracle.t0) << "\n";
}

GridPtr make_grid(const RunConfig& c) {
  std::vector<Interval> bounds;
  for (std::size_t a = 0; a < c.dim(); ++a) bounds.push_back({c.lower[a], c.upper[a]});
  return build_grid(bounds, c.counts, c.convention);
}

CostSpec make_cost(const RunConfig& c) {
  switch (c.cost) {
    case CostKind::Weighted: return WeightedQuadraticCost(matrix_from(c.cost_A, c.dim()), c.h);
    case CostKind::Kramers: return KramersCost(c.dim() / 2, c.h, c.g_coefficient);
    case CostKind::Kolmogorov: return KolmogorovCost(c.msd_order, c.block_dim, c.h);
  }
  throw ConfigError("cost", "unsupported cost");
}

FreeEnergySpec make_free_energy(const RunConfig& c, const GridPtr& grid) {
  const auto m = static_cast<Eigen::Index>(grid->size());
  Vector f = Vector::Zero(m);
  if (c.potential == PotentialKind::Quadratic) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double* x = grid->point(std::size_t(i));
      double s = 0.0;
      for (auto a : c.potential_axes) s += x[a] * x[a];
      f[i] = 0.5 * c.potential_coefficient * s;
    }
  } else if (c.potential == PotentialKind::Table) {
    std::ifstream in(c.potential_table);
    if (!in) throw ConfigError("potential.table", "cannot open '" + c.potential_table + "'");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "index,value") throw ConfigError("potential.table", "expected header 'index,value'");
    std::vector<bool> seen(grid->size(), false);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw ConfigError("potential.table", "malformed row '" + line + "'");
      const long long idx = std::atoll(line.substr(0, comma).c_str());
      if (idx < 0 || idx >= m || seen[std::size_t(idx)])
        throw ConfigError("potential.table", "index out of range or repeated in row '" + line + "'");
      f[idx] = std::strtod(line.c_str() + comma + 1, nullptr);
      seen[std::size_t(idx)] = true;
      ++rows;
    }
    if (rows != grid->size()) throw ConfigError("potential.table", "row count differs from the grid size");
  }
  try {
    return FreeEnergySpec(grid, std::move(f), c.internal);
  } catch (const InvalidArgument& e) {
    throw ConfigError("potential", e.what());
  }
}

namespace {
Vector gaussian_density(const UniformGrid& grid, const std::vector<double>& mean, double variance) {
  const std::size_t d = grid.dim();
  const double norm = std::pow(2.0 * std::numbers::pi * variance, -0.5 * static_cast<double>(d));
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double* x = grid.point(i);
    double r2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) r2 += (x[a] - mean[a]) * (x[a] - mean[a]);
    out[Eigen::Index(i)] = norm * std::exp(-0.5 * r2 / variance);
  }
  return out;
}
}  // namespace

DiscreteMeasure make_initial(const RunConfig& c, const GridPtr& grid) {
  switch (c.initial) {
    case InitialKind::Gaussian: return DiscreteMeasure::from_density(grid, gaussian_density(*grid, c.initial_mean, c.initial_variance));
    case InitialKind::Green: return sample_on_grid(c.oracle, c.oracle.t0, grid);
    case InitialKind::Uniform: return DiscreteMeasure::uniform(grid);
    case InitialKind::File: {
      std::ifstream in(c.initial_file);
      if (!in) throw ConfigError("initial.file", "cannot open '" + c.initial_file + "'");
      return read_measure_csv(in, grid);
    }
  }
  throw ConfigError("initial", "unsupported initial condition");
}

bool has_exact_solution(const RunConfig& c) {
  if (c.problem == Problem::Heat) return c.initial == InitialKind::Gaussian;
  if (c.problem == Problem::Kramers) return c.initial == InitialKind::Green && c.dim() == 2;
  return false;
}

double reference_time(const RunConfig& c, double s) { return c.problem == Problem::Kramers ? c.oracle.t0 + s : s; }

Vector exact_density_at(const RunConfig& c, const UniformGrid& grid, double s) {
  if (!has_exact_solution(c))
    throw ConfigError("problem", "no closed-form reference solution for this configuration");
  if (c.problem == Problem::Heat) return gaussian_density(grid, c.initial_mean, c.initial_variance + 2.0 * s);
  return exact_density(c.oracle, c.oracle.t0 + s, grid);
}

}  // namespace ejko::cli
