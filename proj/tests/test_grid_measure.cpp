#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ejko/grid_measure.hpp"

using namespace ejko;

TEST(UniformGrid, CellCenterSpacingAndPoints) {
  auto g = build_grid({{-1.0, 1.0}, {0.0, 3.0}}, {4, 3});
  EXPECT_EQ(g->size(), 12u);
  EXPECT_DOUBLE_EQ(g->spacing(0), 0.5);
  EXPECT_DOUBLE_EQ(g->spacing(1), 1.0);
  EXPECT_DOUBLE_EQ(g->tile_volume(), 0.5);
  EXPECT_DOUBLE_EQ(g->point(0)[0], -0.75);
  EXPECT_DOUBLE_EQ(g->point(0)[1], 0.5);
  // last axis varies fastest
  EXPECT_DOUBLE_EQ(g->point(1)[0], -0.75);
  EXPECT_DOUBLE_EQ(g->point(1)[1], 1.5);
  EXPECT_DOUBLE_EQ(g->point(3)[0], -0.25);
}

TEST(UniformGrid, EndpointConventionIncludesBounds) {
  auto g = build_grid({{0.0, 1.0}}, {5}, GridConvention::Endpoint);
  EXPECT_DOUBLE_EQ(g->spacing(0), 0.25);
  EXPECT_DOUBLE_EQ(g->point(0)[0], 0.0);
  EXPECT_DOUBLE_EQ(g->point(4)[0], 1.0);
}

TEST(UniformGrid, RejectsDegenerateAxes) {
  EXPECT_THROW(build_grid({{1.0, 1.0}}, {4}), InvalidArgument);
  EXPECT_THROW(build_grid({{0.0, 1.0}}, {1}), InvalidArgument);
  EXPECT_THROW(build_grid({{0.0, 1.0}}, {3, 3}), InvalidArgument);
}

TEST(UniformGrid, UnravelInvertsStorageOrder) {
  auto g = build_grid({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, {2, 3, 4});
  for (std::size_t i = 0; i < g->size(); ++i) {
    const auto k = g->unravel(i);
    EXPECT_EQ((k[0] * 3 + k[1]) * 4 + k[2], i);
  }
}

TEST(DiscreteMeasure, NormalizesAndKeepsRawMass) {
  auto g = build_grid({{0.0, 1.0}}, {4});
  DiscreteMeasure mu(g, Vector::Constant(4, 2.0));
  EXPECT_NEAR(mu.weights().sum(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(mu.pre_normalization_mass(), 8.0);
  EXPECT_DOUBLE_EQ(mu[2], 0.25);
}

TEST(DiscreteMeasure, RejectsInvalidWeights) {
  auto g = build_grid({{0.0, 1.0}}, {3});
  EXPECT_THROW(DiscreteMeasure(g, Vector::Zero(3)), InvalidArgument);
  EXPECT_THROW(DiscreteMeasure(g, Vector::Ones(2)), InvalidArgument);
  Vector w = Vector::Ones(3);
  w[1] = -0.1;
  EXPECT_THROW(DiscreteMeasure(g, w), InvalidArgument);
  w[1] = std::nan("");
  EXPECT_THROW(DiscreteMeasure(g, w), InvalidArgument);
}

TEST(DiscreteMeasure, EntropyOfUniformIsMinusLogVolume) {
  auto g = build_grid({{-3.0, 3.0}, {0.0, 2.0}}, {30, 7});
  EXPECT_NEAR(discrete_entropy(DiscreteMeasure::uniform(g)), -std::log(12.0), 1e-12);
}

TEST(DiscreteMeasure, SecondMomentAndMean) {
  auto g = build_grid({{-1.0, 1.0}}, {2});
  const auto mu = DiscreteMeasure::uniform(g);
  EXPECT_NEAR(second_moment(mu), 0.25, 1e-15);
  EXPECT_NEAR(axis_mean(mu, 0), 0.0, 1e-15);
  EXPECT_NEAR(axis_mean(DiscreteMeasure::point_mass(g, 1), 0), 0.5, 1e-15);
}

TEST(DiscreteMeasure, L1IsAMetric) {
  auto g = build_grid({{0.0, 1.0}}, {16});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_measure = [&] {
    Vector w(16);
    for (auto& x : w) x = u(rng);
    return DiscreteMeasure(g, w);
  };
  for (int s = 0; s < 50; ++s) {
    const auto a = random_measure(), b = random_measure(), c = random_measure();
    EXPECT_NEAR(l1_distance(a, b), l1_distance(b, a), 1e-15);
    EXPECT_LE(l1_distance(a, c), l1_distance(a, b) + l1_distance(b, c) + 1e-15);
    EXPECT_LE(l1_distance(a, b), 2.0 + 1e-15);
    EXPECT_EQ(l1_distance(a, a), 0.0);
  }
}

TEST(DiscreteMeasure, L1ToOwnDensityIsZero) {
  auto g = build_grid({{-2.0, 2.0}}, {40});
  Vector d(40);
  for (Eigen::Index i = 0; i < 40; ++i) d[i] = std::exp(-g->point(std::size_t(i))[0] * g->point(std::size_t(i))[0]);
  const auto mu = DiscreteMeasure::from_density(g, d);
  EXPECT_NEAR(l1_distance_to_density(mu, mu.density()), 0.0, 1e-15);
}

TEST(DiscreteMeasure, DifferentGridsAreRejected) {
  auto g1 = build_grid({{0.0, 1.0}}, {4});
  auto g2 = build_grid({{0.0, 2.0}}, {4});
  EXPECT_THROW(l1_distance(DiscreteMeasure::uniform(g1), DiscreteMeasure::uniform(g2)), GridMismatch);
  auto g3 = build_grid({{0.0, 1.0}}, {4});
  EXPECT_NO_THROW(l1_distance(DiscreteMeasure::uniform(g1), DiscreteMeasure::uniform(g3)));
}

TEST(DiscreteMeasure, MarginalPreservesMassAndSums) {
  auto g = build_grid({{0.0, 1.0}, {0.0, 1.0}}, {3, 4});
  Vector w(12);
  for (Eigen::Index i = 0; i < 12; ++i) w[i] = double(i + 1);
  const DiscreteMeasure mu(g, w);
  const auto mx = marginal(mu, {0});
  const auto mv = marginal(mu, {1});
  EXPECT_EQ(mx.size(), 3u);
  EXPECT_EQ(mv.size(), 4u);
  EXPECT_NEAR(mx.weights().sum(), 1.0, 1e-15);
  EXPECT_NEAR(mx[0], (1 + 2 + 3 + 4) / 78.0, 1e-15);
  EXPECT_NEAR(mv[0], (1 + 5 + 9) / 78.0, 1e-15);
  EXPECT_THROW(marginal(mu, {2}), InvalidArgument);
  EXPECT_THROW(marginal(mu, {0, 0}), InvalidArgument);
}

TEST(MeasureCsv, RoundTripsExactly) {
  auto g = build_grid({{-0.5, 0.5}, {-2.4, 2.4}}, {5, 3});
  Vector w(15);
  for (Eigen::Index i = 0; i < 15; ++i) w[i] = 1.0 / (i + 3.0);
  const DiscreteMeasure mu(g, w);
  std::stringstream ss;
  write_measure_csv(ss, mu);
  EXPECT_EQ(ss.str().substr(0, 29), "index,coord_1,coord_2,weight\n");
  const auto back = read_measure_csv(ss, g);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(back[i], mu[i]);
}

TEST(MeasureCsv, RejectsWrongGrid) {
  auto g = build_grid({{0.0, 1.0}}, {4});
  auto other = build_grid({{0.0, 4.0}}, {4});
  std::stringstream ss;
  write_measure_csv(ss, DiscreteMeasure::uniform(g));
  EXPECT_THROW(read_measure_csv(ss, other), GridMismatch);
  std::stringstream bad("index,coord_1,coord_2,weight\n");
  EXPECT_THROW(read_measure_csv(bad, g), InvalidArgument);
}
