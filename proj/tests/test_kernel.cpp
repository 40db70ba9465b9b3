#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ejko/kernel.hpp"

using namespace ejko;

namespace {

KernelOperator make(KernelMode mode, double eps = 0.3, std::size_t tile = 7) {
  auto g = build_grid({{-0.5, 0.5}, {-1.0, 1.0}}, {6, 5});
  KernelOptions o;
  o.mode = mode;
  o.tile_rows = tile;
  return gibbs_kernel(KramersCost(1, 0.1, 0.0), *g, eps, o);
}

Vector random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(CostTable, MatchesCostSpec) {
  auto g = build_grid({{0.0, 1.0}}, {4});
  const CostTable t(WeightedQuadraticCost(Matrix::Zero(1, 1), 1.0), *g);
  EXPECT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(t(0, 3), 0.75 * 0.75);
  const Matrix d = t.dense();
  EXPECT_DOUBLE_EQ(d(3, 0), 0.75 * 0.75);
  EXPECT_THROW(CostTable(KramersCost(1, 0.1), *g), InvalidArgument);
}

TEST(KernelOperator, EntriesAreGibbsWeights) {
  const auto k = make(KernelMode::Dense);
  for (std::size_t i = 0; i < k.size(); i += 5)
    for (std::size_t j = 0; j < k.size(); j += 3) EXPECT_NEAR(k.entry(i, j), std::exp(-k.cost(i, j) / 0.3), 1e-300);
}

TEST(KernelOperator, DenseAndMatrixFreeProductsAgree) {
  auto kd = make(KernelMode::Dense);
  auto kf = make(KernelMode::MatrixFree);
  const Vector x = random_vector(kd.size(), 1);
  EXPECT_LT((kd.apply(x) - kf.apply(x)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((kd.apply_transpose(x) - kf.apply_transpose(x)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((kd.dense_matrix() - kf.dense_matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(KernelOperator, ProductsMatchExplicitMatrix) {
  for (auto mode : {KernelMode::Dense, KernelMode::MatrixFree}) {
    auto k = make(mode);
    const Matrix K = k.dense_matrix();
    const Vector x = random_vector(k.size(), 2);
    EXPECT_LT((k.apply(x) - K * x).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((k.apply_transpose(x) - K.transpose() * x).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(KernelOperator, LogProductsMatchLinearOnes) {
  auto k = make(KernelMode::MatrixFree);
  const Vector x = random_vector(k.size(), 3);
  const Vector log_x = x.array().log().matrix();
  const Vector kx = k.apply(x), ktx = k.apply_transpose(x);
  for (std::size_t i = 0; i < k.size(); ++i) {
    EXPECT_NEAR(k.log_apply_row(i, log_x), std::log(kx[Eigen::Index(i)]), 1e-12);
    EXPECT_NEAR(k.log_apply_col(i, log_x), std::log(ktx[Eigen::Index(i)]), 1e-12);
  }
}

TEST(KernelOperator, AbsorptionShiftsStabilizedEntries) {
  for (auto mode : {KernelMode::Dense, KernelMode::MatrixFree}) {
    auto k = make(mode);
    const Vector du = random_vector(k.size(), 4), dv = random_vector(k.size(), 5);
    const double before = k.log_entry(3, 7);
    k.absorb(du, dv);
    EXPECT_NEAR(k.log_entry(3, 7), before + (du[3] + dv[7]) / k.epsilon(), 1e-12);
    EXPECT_NEAR(k.row_potential()[3], du[3], 0.0);
    k.reset_potentials();
    EXPECT_NEAR(k.log_entry(3, 7), before, 1e-12);
  }
}

TEST(KernelOperator, DenseModeRespectsMemoryBudget) {
  auto g = build_grid({{0.0, 1.0}}, {100});
  KernelOptions o;
  o.dense_memory_budget = 2 * 8 * 100 * 100 - 1;
  EXPECT_THROW(gibbs_kernel(WeightedQuadraticCost(Matrix::Identity(1, 1), 0.1), *g, 0.1, o), MemoryBudgetError);
  o.mode = KernelMode::MatrixFree;
  EXPECT_NO_THROW(gibbs_kernel(WeightedQuadraticCost(Matrix::Identity(1, 1), 0.1), *g, 0.1, o));
}

TEST(KernelOperator, RejectsBadArguments) {
  auto g = build_grid({{0.0, 1.0}}, {4});
  EXPECT_THROW(gibbs_kernel(WeightedQuadraticCost(Matrix::Identity(1, 1), 0.1), *g, 0.0), InvalidArgument);
  EXPECT_THROW(gibbs_kernel(KramersCost(1, 0.1), *g, 0.1), InvalidArgument);
  auto k = make(KernelMode::Dense);
  EXPECT_THROW(k.apply(Vector::Ones(3)), InvalidArgument);
}
