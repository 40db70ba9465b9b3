#pragma once

// Gibbs kernel K_ij = exp(-c_h(x_i, x_j) / eps) as a linear operator.
//
// The operator carries absorbed log-potentials u (rows) and v (columns), in cost units,
// and exposes the stabilized kernel
//
//     Kt_ij = exp((u_i + v_j - c_ij) / eps),
//
// so that K = diag(exp(-u/eps)) Kt diag(exp(-v/eps)). With u = v = 0 it is the plain
// Gibbs kernel. Dense mode caches the cost matrix and Kt; matrix-free mode evaluates
// entries on demand, in contiguous blocks of rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#ifdef EJKO_HAS_OPENMP
#include <omp.h>
#endif

#include "ejko/costs.hpp"
#include "ejko/error.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

enum class KernelMode { Dense, MatrixFree };

struct KernelOptions {
  KernelMode mode = KernelMode::Dense;
  /// Upper bound on the bytes held by the dense cost and kernel matrices.
  std::size_t dense_memory_budget = std::size_t{1} << 30;
  /// Rows per block when generating kernel rows on demand.
  std::size_t tile_rows = 1024;
};

/// Points plus a cost; immutable and shareable between kernels and plans.
class CostTable {
 public:
  CostTable(CostSpec cost, RowMatrix points) : cost_(std::move(cost)), points_(std::move(points)) {
    if (points_.rows() == 0) throw InvalidArgument("cost table needs at least one point");
    if (static_cast<std::size_t>(points_.cols()) != cost_dim(cost_))
      throw InvalidArgument("point dimension " + std::to_string(points_.cols()) + " does not match cost dimension " +
                            std::to_string(cost_dim(cost_)));
  }
  CostTable(CostSpec cost, const UniformGrid& grid) : CostTable(std::move(cost), grid.coordinates()) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  const CostSpec& cost() const noexcept { return cost_; }
  const RowMatrix& points() const noexcept { return points_; }
  const double* point(std::size_t i) const noexcept { return points_.data() + i * points_.cols(); }

  double operator()(std::size_t i, std::size_t j) const { return evaluate_cost(cost_, point(i), point(j)); }

  /// Calls fn(c) with the concrete cost functor, so inner loops inline the evaluation.
  template <typename Fn>
  decltype(auto) visit(Fn&& fn) const {
    return std::visit(std::forward<Fn>(fn), cost_);
  }

  /// Full M x M cost matrix.
  Matrix dense() const {
    const auto m = static_cast<Eigen::Index>(size());
    Matrix c(m, m);
    visit([&](const auto& cost) {
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < m; ++i) c(i, j) = cost(point(std::size_t(i)), point(std::size_t(j)));
    });
    return c;
  }

 private:
  CostSpec cost_;
  RowMatrix points_;
};

using CostTablePtr = std::shared_ptr<const CostTable>;

class KernelOperator {
 public:
  KernelOperator(CostTablePtr costs, double epsilon, KernelOptions options = {})
      : costs_(std::move(costs)), epsilon_(epsilon), options_(options) {
    if (!costs_) throw InvalidArgument("kernel needs a cost table");
    if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) throw InvalidArgument("epsilon must be positive and finite");
    if (options_.tile_rows == 0) throw InvalidArgument("tile_rows must be positive");
    const auto m = static_cast<Eigen::Index>(size());
    u_ = Vector::Zero(m);
    v_ = Vector::Zero(m);
    if (options_.mode == KernelMode::Dense) {
      const double bytes = 2.0 * sizeof(double) * static_cast<double>(m) * static_cast<double>(m);
      if (bytes > static_cast<double>(options_.dense_memory_budget))
        throw MemoryBudgetError("dense kernel for " + std::to_string(m) + " points needs " +
                                std::to_string(static_cast<long long>(bytes / (1 << 20))) +
                                " MiB, over the budget; use the matrix-free mode");
      cost_matrix_ = costs_->dense();
      refresh_dense();
    }
  }

  std::size_t size() const noexcept { return costs_->size(); }
  double epsilon() const noexcept { return epsilon_; }
  KernelMode mode() const noexcept { return options_.mode; }
  const KernelOptions& options() const noexcept { return options_; }
  const CostTablePtr& costs() const noexcept { return costs_; }
  /// Absorbed row potential u (cost units).
  const Vector& row_potential() const noexcept { return u_; }
  /// Absorbed column potential v (cost units).
  const Vector& col_potential() const noexcept { return v_; }

  double cost(std::size_t i, std::size_t j) const {
    if (options_.mode == KernelMode::Dense) return cost_matrix_(Eigen::Index(i), Eigen::Index(j));
    return (*costs_)(i, j);
  }

  /// log Kt_ij
  double log_entry(std::size_t i, std::size_t j) const {
    return (u_[Eigen::Index(i)] + v_[Eigen::Index(j)] - cost(i, j)) / epsilon_;
  }
  double entry(std::size_t i, std::size_t j) const {
    if (options_.mode == KernelMode::Dense) return kernel_(Eigen::Index(i), Eigen::Index(j));
    return std::exp(log_entry(i, j));
  }

  /// Kt x
  Vector apply(const Vector& x) const {
    check_length(x);
    if (options_.mode == KernelMode::Dense) return kernel_ * x;
    Vector out(x.size());
    const auto m = static_cast<long>(size());
    const double inv_eps = 1.0 / epsilon_;
    costs_->visit([&](const auto& c) {
#ifdef EJKO_HAS_OPENMP
#pragma omp parallel for schedule(static, tile_chunk())
#endif
      for (long i = 0; i < m; ++i) {
        const double* xi = costs_->point(std::size_t(i));
        const double ui = u_[i];
        double s = 0.0;
        for (long j = 0; j < m; ++j) {
          if (x[j] == 0.0) continue;
          s += std::exp((ui + v_[j] - c(xi, costs_->point(std::size_t(j)))) * inv_eps) * x[j];
        }
        out[i] = s;
      }
    });
    return out;
  }

  /// Kt^T x
  Vector apply_transpose(const Vector& x) const {
    check_length(x);
    if (options_.mode == KernelMode::Dense) return kernel_.transpose() * x;
    Vector out(x.size());
    const auto m = static_cast<long>(size());
    const double inv_eps = 1.0 / epsilon_;
    costs_->visit([&](const auto& c) {
#ifdef EJKO_HAS_OPENMP
#pragma omp parallel for schedule(static, tile_chunk())
#endif
      for (long j = 0; j < m; ++j) {
        const double* xj = costs_->point(std::size_t(j));
        const double vj = v_[j];
        double s = 0.0;
        for (long i = 0; i < m; ++i) {
          if (x[i] == 0.0) continue;
          s += std::exp((u_[i] + vj - c(costs_->point(std::size_t(i)), xj)) * inv_eps) * x[i];
        }
        out[j] = s;
      }
    });
    return out;
  }

  /// log sum_j Kt_ij exp(log_x_j), evaluated with a max shift; used where the linear
  /// product underflows.
  double log_apply_row(std::size_t i, const Vector& log_x) const {
    return log_sum([&](std::size_t j) { return log_entry(i, j) + log_x[Eigen::Index(j)]; });
  }
  /// log sum_i Kt_ij exp(log_x_i)
  double log_apply_col(std::size_t j, const Vector& log_x) const {
    return log_sum([&](std::size_t i) { return log_entry(i, j) + log_x[Eigen::Index(i)]; });
  }

  /// u += du, v += dv; dense mode regenerates the cached kernel.
  void absorb(const Vector& du, const Vector& dv) {
    check_length(du);
    check_length(dv);
    u_ += du;
    v_ += dv;
    if (options_.mode == KernelMode::Dense) refresh_dense();
  }

  void set_potentials(const Vector& u, const Vector& v) {
    check_length(u);
    check_length(v);
    u_ = u;
    v_ = v;
    if (options_.mode == KernelMode::Dense) refresh_dense();
  }

  void reset_potentials() {
    set_potentials(Vector::Zero(u_.size()), Vector::Zero(v_.size()));
  }

  /// Stabilized kernel as a dense matrix (any mode).
  Matrix dense_matrix() const {
    if (options_.mode == KernelMode::Dense) return kernel_;
    const auto m = static_cast<Eigen::Index>(size());
    Matrix k(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < m; ++i) k(i, j) = entry(std::size_t(i), std::size_t(j));
    return k;
  }

 private:
  int tile_chunk() const noexcept { return static_cast<int>(std::min<std::size_t>(options_.tile_rows, 1 << 20)); }

  void check_length(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != size())
      throw InvalidArgument("kernel operand has length " + std::to_string(x.size()) + ", expected " +
                            std::to_string(size()));
  }

  void refresh_dense() {
    const auto m = cost_matrix_.rows();
    kernel_.resize(m, m);
    const double inv_eps = 1.0 / epsilon_;
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < m; ++i) kernel_(i, j) = std::exp((u_[i] + v_[j] - cost_matrix_(i, j)) * inv_eps);
  }

  template <typename Term>
  double log_sum(Term term) const {
    const std::size_t m = size();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) peak = std::max(peak, term(k));
    if (!std::isfinite(peak)) return peak;
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += std::exp(term(k) - peak);
    return peak + std::log(s);
  }

  CostTablePtr costs_;
  double epsilon_;
  KernelOptions options_;
  Vector u_, v_;
  Matrix cost_matrix_;
  Matrix kernel_;
};

/// Builds the Gibbs kernel of `cost` on the points of `grid`.
inline KernelOperator gibbs_kernel(const CostSpec& cost, const UniformGrid& grid, double epsilon,
                                   KernelOptions options = {}) {
  if (grid.dim() != cost_dim(cost))
    throw InvalidArgument("grid dimension does not match cost dimension");
  return KernelOperator(std::make_shared<const CostTable>(cost, grid), epsilon, options);
}

}  // namespace ejko
