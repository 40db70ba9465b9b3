#pragma once

// Entropic optimal transport between two fixed marginals by alternating scaling.
//
// Scalings are kept in log form against the stabilized kernel Kt of KernelOperator:
// the plan is pi_ij = exp(log_a_i + log Kt_ij + log_b_j). A zero target entry gives
// log_a_i = -inf, i.e. an empty row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ejko/error.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/kernel.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

struct ScalingOptions {
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  /// Absorb large scalings into the kernel potentials instead of failing.
  bool log_domain = false;
  /// Scalings outside [1/threshold, threshold] trigger absorption (or failure).
  double absorption_threshold = 1e50;
};

struct ScalingState {
  Vector log_a;  ///< log of the row scaling against the stabilized kernel
  Vector log_b;  ///< log of the column scaling against the stabilized kernel
  std::size_t iterations = 0;
  std::size_t absorptions = 0;
  /// L1 marginal residual after every iteration.
  std::vector<double> residual_history;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;

  bool initialized(std::size_t m) const noexcept {
    return static_cast<std::size_t>(log_b.size()) == m && static_cast<std::size_t>(log_a.size()) == m;
  }
};

namespace detail {

inline constexpr double kLinearFloor = 1e-280;

inline Vector exp_vector(const Vector& log_x) { return log_x.array().exp().matrix(); }

// log(Kt x) (or log(Kt^T x)) where x = exp(log_x). Entries whose linear sum falls below
// kLinearFloor are recomputed with a shifted log-sum-exp, or reported when `needed`
// marks them as required and log-domain mode is off.
inline Vector log_product(const KernelOperator& k, const Vector& log_x, bool transpose, const Vector* needed,
                          bool log_domain) {
  const Vector x = exp_vector(log_x);
  const Vector s = transpose ? k.apply_transpose(x) : k.apply(x);
  Vector out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > kLinearFloor) {
      out[i] = std::log(s[i]);
      continue;
    }
    const bool required = needed == nullptr || (*needed)[i] > 0.0;
    if (!required) {
      out[i] = s[i] > 0.0 ? std::log(s[i]) : -std::numeric_limits<double>::infinity();
      continue;
    }
    if (!log_domain)
      throw UnderflowError("kernel product underflowed at index " + std::to_string(i) +
                           "; enable log-domain mode (--log-domain)");
    out[i] = transpose ? k.log_apply_col(std::size_t(i), log_x) : k.log_apply_row(std::size_t(i), log_x);
  }
  return out;
}

inline double max_abs_finite(const Vector& v) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i])) m = std::max(m, std::abs(v[i]));
  return m;
}

// Moves the finite parts of log_a and log_b into the kernel potentials.
inline void absorb_scalings(KernelOperator& k, Vector& log_a, Vector& log_b) {
  const double eps = k.epsilon();
  Vector du = Vector::Zero(log_a.size());
  Vector dv = Vector::Zero(log_b.size());
  for (Eigen::Index i = 0; i < log_a.size(); ++i)
    if (std::isfinite(log_a[i])) {
      du[i] = eps * log_a[i];
      log_a[i] = 0.0;
    }
  for (Eigen::Index j = 0; j < log_b.size(); ++j)
    if (std::isfinite(log_b[j])) {
      dv[j] = eps * log_b[j];
      log_b[j] = 0.0;
    }
  k.absorb(du, dv);
}

// Absorbs (or fails) when any scaling leaves the allowed range.
inline bool stabilize(KernelOperator& k, ScalingState& st, const ScalingOptions& opt) {
  const double limit = std::log(opt.absorption_threshold);
  if (max_abs_finite(st.log_a) <= limit && max_abs_finite(st.log_b) <= limit) return false;
  if (!opt.log_domain)
    throw UnderflowError("scaling factor left [1e-50, 1e50] after " + std::to_string(st.iterations) +
                         " iterations; enable log-domain mode (--log-domain)");
  absorb_scalings(k, st.log_a, st.log_b);
  ++st.absorptions;
  return true;
}

inline Vector safe_log(const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[i] = x[i] > 0.0 ? std::log(x[i]) : -std::numeric_limits<double>::infinity();
  return out;
}

inline void check_options(const ScalingOptions& opt) {
  if (!(opt.tol > 0.0)) throw InvalidArgument("scaling tolerance must be positive");
  if (opt.max_iter == 0) throw InvalidArgument("scaling max_iter must be positive");
  if (!(opt.absorption_threshold > 1.0)) throw InvalidArgument("absorption threshold must exceed 1");
}

}  // namespace detail

/// Coupling on an M-point set, either as an explicit matrix or in factored form
/// pi_ij = exp(log_a_i + (u_i + v_j - c_ij) / eps + log_b_j).
class TransportPlan {
 public:
  enum class Representation { Dense, Factored };

  explicit TransportPlan(Matrix dense) : repr_(Representation::Dense), dense_(std::move(dense)) {
    if (dense_.rows() != dense_.cols()) throw InvalidArgument("transport plan must be square");
    if ((dense_.array() < 0.0).any() || !dense_.allFinite())
      throw InvalidArgument("transport plan entries must be finite and nonnegative");
  }

  TransportPlan(CostTablePtr costs, double epsilon, Vector u, Vector v, Vector log_a, Vector log_b)
      : repr_(Representation::Factored),
        costs_(std::move(costs)),
        epsilon_(epsilon),
        u_(std::move(u)),
        v_(std::move(v)),
        log_a_(std::move(log_a)),
        log_b_(std::move(log_b)) {}

  /// Snapshot of a scaling state against the kernel's current potentials.
  static TransportPlan factored(const KernelOperator& k, const ScalingState& st) {
    return TransportPlan(k.costs(), k.epsilon(), k.row_potential(), k.col_potential(), st.log_a, st.log_b);
  }

  Representation representation() const noexcept { return repr_; }
  std::size_t size() const noexcept {
    return repr_ == Representation::Dense ? static_cast<std::size_t>(dense_.rows())
                                          : static_cast<std::size_t>(log_a_.size());
  }

  double log_entry(std::size_t i, std::size_t j) const {
    if (repr_ == Representation::Dense) {
      const double p = dense_(Eigen::Index(i), Eigen::Index(j));
      return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    }
    const auto a = Eigen::Index(i), b = Eigen::Index(j);
    if (!std::isfinite(log_a_[a]) || !std::isfinite(log_b_[b])) return -std::numeric_limits<double>::infinity();
    return log_a_[a] + log_b_[b] + (u_[a] + v_[b] - (*costs_)(i, j)) / epsilon_;
  }

  double entry(std::size_t i, std::size_t j) const {
    if (repr_ == Representation::Dense) return dense_(Eigen::Index(i), Eigen::Index(j));
    return std::exp(log_entry(i, j));
  }

  Matrix to_dense() const {
    if (repr_ == Representation::Dense) return dense_;
    const auto m = static_cast<Eigen::Index>(size());
    Matrix p(m, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < m; ++i) p(i, j) = entry(std::size_t(i), std::size_t(j));
    return p;
  }

  /// pi 1
  Vector row_sums() const { return sums(false); }
  /// pi^T 1
  Vector col_sums() const { return sums(true); }
  double total_mass() const { return row_sums().sum(); }

 private:
  Vector sums(bool columns) const {
    const std::size_t m = size();
    Vector out(static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < m; ++r) {
      CompensatedSum s;
      for (std::size_t c = 0; c < m; ++c) s.add(columns ? entry(c, r) : entry(r, c));
      out[Eigen::Index(r)] = s.value();
    }
    return out;
  }

  Representation repr_;
  Matrix dense_;
  CostTablePtr costs_;
  double epsilon_ = 1.0;
  Vector u_, v_, log_a_, log_b_;
};

/// KL(pi || K) = sum pi log(pi / K) - pi + K on explicit matrices; +inf when pi > 0 where K = 0.
inline double kl_divergence(const Matrix& pi, const Matrix& kernel) {
  if (pi.rows() != kernel.rows() || pi.cols() != kernel.cols()) throw InvalidArgument("kl_divergence: shape mismatch");
  CompensatedSum s;
  for (Eigen::Index j = 0; j < pi.cols(); ++j)
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
      const double p = pi(i, j), k = kernel(i, j);
      if (p > 0.0 && k <= 0.0) return std::numeric_limits<double>::infinity();
      s.add(xlogy_ratio(p, k) - p + k);
    }
  return s.value();
}

/// KL(pi || K) against the plain Gibbs kernel K_ij = exp(-c_ij / eps), evaluated in log form.
inline double kl_divergence(const TransportPlan& pi, const KernelOperator& k) {
  if (pi.size() != k.size()) throw InvalidArgument("kl_divergence: size mismatch");
  const std::size_t m = k.size();
  const double eps = k.epsilon();
  CompensatedSum s;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double log_k = -k.cost(i, j) / eps;
      const double log_p = pi.log_entry(i, j);
      const double p = std::exp(log_p);
      if (p > 0.0) s.add(p * (log_p - log_k));
      s.add(std::exp(log_k) - p);
    }
  return s.value();
}

/// sum c_ij pi_ij
inline double transport_cost(const TransportPlan& pi, const CostTable& costs) {
  if (pi.size() != costs.size()) throw InvalidArgument("transport_cost: size mismatch");
  CompensatedSum s;
  for (std::size_t i = 0; i < costs.size(); ++i)
    for (std::size_t j = 0; j < costs.size(); ++j) {
      const double p = pi.entry(i, j);
      if (p > 0.0) s.add(costs(i, j) * p);
    }
  return s.value();
}

/// sum c_ij pi_ij + eps pi_ij log(pi_ij / lambda^2), with 0 log 0 = 0.
inline double regularized_cost(const TransportPlan& pi, const CostTable& costs, double epsilon, double lambda) {
  if (pi.size() != costs.size()) throw InvalidArgument("regularized_cost: size mismatch");
  if (!(lambda > 0.0)) throw InvalidArgument("regularized_cost: tile volume must be positive");
  const double log_l2 = 2.0 * std::log(lambda);
  CompensatedSum s;
  for (std::size_t i = 0; i < costs.size(); ++i)
    for (std::size_t j = 0; j < costs.size(); ++j) {
      const double log_p = pi.log_entry(i, j);
      if (!std::isfinite(log_p)) continue;
      const double p = std::exp(log_p);
      if (p == 0.0) continue;
      s.add(costs(i, j) * p + epsilon * p * (log_p - log_l2));
    }
  return s.value();
}

struct SinkhornResult {
  TransportPlan plan;
  ScalingState state;
};

/// Alternating scaling a <- mu / (K b), b <- nu / (K^T a) on raw weight vectors.
/// The returned state records whether the L1 residual reached `opt.tol`; on
/// non-convergence the last plan and residual are returned for the caller to judge.
inline SinkhornResult sinkhorn(KernelOperator& k, const Vector& mu, const Vector& nu, const ScalingOptions& opt = {},
                               ScalingState warm = {}) {
  detail::check_options(opt);
  const std::size_t m = k.size();
  if (static_cast<std::size_t>(mu.size()) != m || static_cast<std::size_t>(nu.size()) != m)
    throw GridMismatch("sinkhorn: marginal length does not match kernel size");
  if ((mu.array() < 0.0).any() || (nu.array() < 0.0).any()) throw InvalidArgument("sinkhorn: negative marginal");

  const Vector log_mu = detail::safe_log(mu);
  const Vector log_nu = detail::safe_log(nu);
  ScalingState st;
  st.log_a = Vector::Zero(static_cast<Eigen::Index>(m));
  st.log_b = warm.initialized(m) ? warm.log_b : Vector::Zero(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < nu.size(); ++j)
    if (!(nu[j] > 0.0)) st.log_b[j] = -std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const Vector log_kb = detail::log_product(k, st.log_b, false, &mu, opt.log_domain);
    st.log_a = log_mu - log_kb;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      if (!(mu[i] > 0.0)) st.log_a[i] = -std::numeric_limits<double>::infinity();
    ++st.iterations;
    detail::stabilize(k, st, opt);

    const Vector log_kta = detail::log_product(k, st.log_a, true, &nu, opt.log_domain);
    CompensatedSum r;
    for (Eigen::Index j = 0; j < nu.size(); ++j) {
      const double col = std::isfinite(st.log_b[j]) ? std::exp(st.log_b[j] + log_kta[j]) : 0.0;
      r.add(std::abs(col - nu[j]));
    }
    st.residual = r.value();
    st.residual_history.push_back(st.residual);
    if (st.residual <= opt.tol) {
      st.converged = true;
      break;
    }
    st.log_b = log_nu - log_kta;
    for (Eigen::Index j = 0; j < nu.size(); ++j)
      if (!(nu[j] > 0.0)) st.log_b[j] = -std::numeric_limits<double>::infinity();
    detail::stabilize(k, st, opt);
  }
  return SinkhornResult{TransportPlan::factored(k, st), std::move(st)};
}

inline SinkhornResult sinkhorn(KernelOperator& k, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const ScalingOptions& opt = {}) {
  require_same_grid(mu.grid(), nu.grid());
  return sinkhorn(k, mu.weights(), nu.weights(), opt);
}

}  // namespace ejko
