#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "ejko/cli/config.hpp"

using namespace ejko;
using namespace ejko::cli;

namespace {

const char* kKramers = R"(# full-resolution Kramers setup
problem = kramers
grid.lower = -0.5, -2.4
grid.upper = 0.5, 2.4
grid.counts = 200, 130
h = 0.02
epsilon = 0.09
T = 0.16
)";

const char* kHeat = R"(problem = heat
grid.lower = -3
grid.upper = 3
grid.counts = 200
h = 0.0125
epsilon = 1.3977e-5
T = 0.25
log_domain = true
)";

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string config_error_key(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

std::string without(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind(key + " ", 0) != 0) out += line + "\n";
  return out;
}

}  // namespace

TEST(ParseConfig, KramersDefaults) {
  const auto c = parse(kKramers);
  EXPECT_EQ(c.problem, Problem::Kramers);
  EXPECT_EQ(c.counts, (std::vector<std::size_t>{200, 130}));
  EXPECT_EQ(c.cost, CostKind::Kramers);
  EXPECT_EQ(c.potential, PotentialKind::Quadratic);
  EXPECT_EQ(c.potential_axes, (std::vector<std::size_t>{1}));
  EXPECT_EQ(c.initial, InitialKind::Green);
  EXPECT_EQ(c.steps(), 8u);
  EXPECT_DOUBLE_EQ(c.oracle.t0, 0.14);
  EXPECT_EQ(c.kernel, KernelMode::Dense);
  EXPECT_TRUE(has_exact_solution(c));
  EXPECT_DOUBLE_EQ(reference_time(c, 0.06), 0.2);
}

TEST(ParseConfig, HeatDefaults) {
  const auto c = parse(kHeat);
  EXPECT_EQ(c.cost, CostKind::Weighted);
  EXPECT_EQ(c.cost_A, (std::vector<double>{1.0}));
  EXPECT_EQ(c.internal.kind(), InternalEnergy::Kind::Boltzmann);
  EXPECT_TRUE(c.log_domain);
  EXPECT_EQ(c.steps(), 20u);
  EXPECT_TRUE(has_exact_solution(c));
}

TEST(ParseConfig, MissingRequiredKeysAreNamed) {
  for (const std::string key : {"h", "epsilon", "T", "problem", "grid.counts", "grid.lower"})
    EXPECT_EQ(config_error_key(without(kKramers, key)), key) << key;
}

TEST(ParseConfig, RangeErrorsAreNamed) {
  EXPECT_EQ(config_error_key(std::string(kKramers) + "tol = 0\n"), "tol");
  EXPECT_EQ(config_error_key(without(kKramers, "epsilon") + "epsilon = 0\n"), "epsilon");
  EXPECT_EQ(config_error_key(without(kKramers, "h") + "h = -0.02\n"), "h");
  EXPECT_EQ(config_error_key(without(kKramers, "T") + "T = 0.17\n"), "T");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "threads = -1\n"), "threads");
}

TEST(ParseConfig, TypeErrorsAreNamed) {
  EXPECT_EQ(config_error_key(without(kKramers, "h") + "h = fast\n"), "h");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "max_iter = 1.5\n"), "max_iter");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "log_domain = maybe\n"), "log_domain");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "kernel = sparse\n"), "kernel");
}

TEST(ParseConfig, StrictAboutUnknownAndRepeatedKeys) {
  EXPECT_EQ(config_error_key(std::string(kKramers) + "epsilom = 0.1\n"), "epsilom");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "h = 0.02\n"), "h");
  EXPECT_EQ(config_error_key(std::string(kKramers) + "output =\n"), "output");
}

TEST(ParseConfig, CrossFieldChecks) {
  EXPECT_EQ(config_error_key(std::string(kHeat) + "cost = kramers\n"), "cost");
  EXPECT_EQ(config_error_key(std::string(kHeat) + "initial = green\n"), "initial");
  EXPECT_EQ(config_error_key(std::string(kHeat) + "internal.m = 3\n"), "internal.m");
  EXPECT_EQ(config_error_key(std::string(kHeat) + "cost.g_coefficient = 2\n"), "cost.g_coefficient");
}

TEST(ParseConfig, ResolvedEchoRoundTrips) {
  const auto c = parse(std::string(kKramers) + "kernel = matrix_free\nsave_every = 4\n");
  std::ostringstream out;
  write_resolved(out, c);
  const auto back = parse(out.str());
  std::ostringstream again;
  write_resolved(again, back);
  EXPECT_EQ(out.str(), again.str());
  EXPECT_EQ(back.kernel, KernelMode::MatrixFree);
  EXPECT_EQ(back.save_every, 4u);
}

TEST(Builders, KramersPieces) {
  const auto c = parse(without(kKramers, "grid.counts") + "grid.counts = 12, 8\n");
  const auto g = make_grid(c);
  EXPECT_EQ(g->size(), 96u);
  const auto spec = make_free_energy(c, g);
  for (std::size_t i = 0; i < g->size(); ++i)
    EXPECT_DOUBLE_EQ(spec.potential()[Eigen::Index(i)], 0.5 * g->point(i)[1] * g->point(i)[1]);
  const auto rho0 = make_initial(c, g);
  EXPECT_NEAR(rho0.weights().sum(), 1.0, 1e-14);
  EXPECT_EQ(cost_dim(make_cost(c)), 2u);
  EXPECT_DOUBLE_EQ(cost_h(make_cost(c)), 0.02);
}

TEST(Builders, HeatReferenceSpreads) {
  const auto c = parse(kHeat);
  const auto g = make_grid(c);
  const Vector d0 = exact_density_at(c, *g, 0.0);
  const Vector d1 = exact_density_at(c, *g, 0.25);
  EXPECT_GT(d0.maxCoeff(), d1.maxCoeff());
  // variance 0.75 on [-3, 3] leaves about 5e-4 of the mass outside
  EXPECT_NEAR(d1.sum() * g->tile_volume(), std::erf(3.0 / std::sqrt(1.5)), 1e-6);
}
