#pragma once

// Transport costs c_h(x, y) for one time step h:
//
//   WeightedQuadraticCost  <(A + hI)^{-1}(x - y), x - y>            (non-linear diffusion)
//   KramersCost            |v' - v + h grad g(x)|^2
//                            + 12 |(x' - x)/h - (v' + v)/2|^2      (kinetic Fokker-Planck)
//   KolmogorovCost         h^{2-2n} b^T M b                         (mean-squared-derivative chain)
//
// plus the matrix algebra behind the Kolmogorov cost.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ejko/error.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

namespace detail {

inline double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weighted quadratic cost.

class WeightedQuadraticCost {
 public:
  WeightedQuadraticCost(Matrix diffusion, double h) : diffusion_(std::move(diffusion)), h_(h) {
    if (!(h_ > 0.0)) throw InvalidArgument("time step h must be positive");
    if (diffusion_.rows() != diffusion_.cols() || diffusion_.rows() == 0)
      throw InvalidArgument("diffusion matrix must be square and nonempty");
    const double scale = std::max(1.0, diffusion_.cwiseAbs().maxCoeff());
    if ((diffusion_ - diffusion_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InvalidArgument("diffusion matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(diffusion_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
      throw InvalidArgument("diffusion matrix is not positive semi-definite");
    const Matrix shifted = diffusion_ + h_ * Matrix::Identity(diffusion_.rows(), diffusion_.cols());
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) throw InvalidArgument("A + hI is singular");
    precision_ = llt.solve(Matrix::Identity(shifted.rows(), shifted.cols()));
    precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(diffusion_.rows()); }
  double h() const noexcept { return h_; }
  const Matrix& diffusion() const noexcept { return diffusion_; }
  /// (A + hI)^{-1}
  const Matrix& precision() const noexcept { return precision_; }

  double operator()(const double* x, const double* y) const {
    const auto d = static_cast<Eigen::Index>(dim());
    double c = 0.0;
    for (Eigen::Index r = 0; r < d; ++r) {
      const double dr = x[r] - y[r];
      double row = 0.0;
      for (Eigen::Index s = 0; s < d; ++s) row += precision_(r, s) * (x[s] - y[s]);
      c += dr * row;
    }
    return c;
  }

 private:
  Matrix diffusion_;
  double h_;
  Matrix precision_;
};

// ---------------------------------------------------------------------------
// Explicit Kramers cost on phase space (x, v) in R^{2 half_dim}.

class KramersCost {
 public:
  /// The confining potential is g(x) = stiffness |x|^2 / 2, so grad g(x) = stiffness x;
  /// stiffness 0 gives g = 0.
  KramersCost(std::size_t half_dim, double h, double g_stiffness = 0.0)
      : half_dim_(half_dim), h_(h), stiffness_(g_stiffness) {
    if (half_dim_ == 0) throw InvalidArgument("Kramers cost needs a positive half dimension");
    if (!(h_ > 0.0)) throw InvalidArgument("time step h must be positive");
    if (!std::isfinite(stiffness_)) throw InvalidArgument("potential stiffness must be finite");
  }

  std::size_t dim() const noexcept { return 2 * half_dim_; }
  std::size_t half_dim() const noexcept { return half_dim_; }
  double h() const noexcept { return h_; }
  double g_stiffness() const noexcept { return stiffness_; }

  double operator()(const double* from, const double* to) const {
    const double* x = from;
    const double* v = from + half_dim_;
    const double* xp = to;
    const double* vp = to + half_dim_;
    double momentum = 0.0;
    double position = 0.0;
    for (std::size_t k = 0; k < half_dim_; ++k) {
      const double a = vp[k] - v[k] + h_ * stiffness_ * x[k];
      const double b = (xp[k] - x[k]) / h_ - 0.5 * (vp[k] + v[k]);
      momentum += a * a;
      position += b * b;
    }
    return momentum + 12.0 * position;
  }

 private:
  std::size_t half_dim_;
  double h_;
  double stiffness_;
};

// ---------------------------------------------------------------------------
// Mean-squared-derivative matrices. All matrices are stored as scalar n x n
// matrices; the full (n d) x (n d) operator is the Kronecker product with I_d.

struct MsdMatrices {
  int n = 1;
  std::size_t block_dim = 1;
  double h = 1.0;
  Matrix M1, M2, M;    // M = M1 M2^{-1}
  Matrix J1, J2, J;    // J = J2^{-1} J1
  Matrix J1_dh, J2_dh; // entrywise d/dh
  Matrix D, Q;
  Matrix K_h;          // closed form

  /// Kronecker product with the identity of the block dimension.
  Matrix expand(const Matrix& scalar) const {
    const auto d = static_cast<Eigen::Index>(block_dim);
    Matrix out = Matrix::Zero(scalar.rows() * d, scalar.cols() * d);
    for (Eigen::Index i = 0; i < scalar.rows(); ++i)
      for (Eigen::Index j = 0; j < scalar.cols(); ++j)
        for (Eigen::Index k = 0; k < d; ++k) out(i * d + k, j * d + k) = scalar(i, j);
    return out;
  }
};

inline constexpr int kMaxMsdOrder = 8;

inline MsdMatrices build_msd_matrices(int n, std::size_t block_dim, double h) {
  using detail::binomial;
  using detail::factorial;
  if (n < 1) throw InvalidArgument("chain length n must be >= 1");
  if (n > kMaxMsdOrder)
    throw InvalidArgument("chain length n = " + std::to_string(n) + " exceeds " + std::to_string(kMaxMsdOrder) +
                          "; factorial growth makes the matrices ill-conditioned");
  if (block_dim == 0) throw InvalidArgument("block dimension must be positive");
  if (!(h > 0.0)) throw InvalidArgument("time step h must be positive");

  MsdMatrices m;
  m.n = n;
  m.block_dim = block_dim;
  m.h = h;
  const Eigen::Index N = n;
  m.M1 = Matrix::Zero(N, N);
  m.M2 = Matrix::Zero(N, N);
  // 1-based k, i:  (M1)_{ki} = (-1)^{n-k} (n+i-1)! / (k+i-n-1)!  when k + i >= n + 1
  for (int k = 1; k <= n; ++k)
    for (int i = 1; i <= n; ++i)
      if (k + i >= n + 1)
        m.M1(k - 1, i - 1) = ((n - k) % 2 == 0 ? 1.0 : -1.0) * factorial(n + i - 1) / factorial(k + i - n - 1);
  // row k = 0..n-1, column c = 0..n-1:  k! * binom(n + c, k)
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < n; ++c) m.M2(k, c) = factorial(k) * binomial(n + c, k);
  // M M2 = M1  <=>  M2^T M^T = M1^T
  Eigen::PartialPivLU<Matrix> lu(m.M2.transpose());
  m.M = lu.solve(m.M1.transpose()).transpose();

  m.J1 = Matrix::Zero(N, N);
  m.J1_dh = Matrix::Zero(N, N);
  m.J2 = Matrix::Zero(N, N);
  m.J2_dh = Matrix::Zero(N, N);
  m.J = Matrix::Zero(N, N);
  for (int i = 0; i < n; ++i) {
    m.J1(i, i) = std::pow(h, i);
    m.J1_dh(i, i) = i == 0 ? 0.0 : i * std::pow(h, i - 1);
    for (int j = i; j < n; ++j) {
      m.J2(i, j) = std::pow(h, j) / factorial(j - i);
      m.J2_dh(i, j) = j == 0 ? 0.0 : j * std::pow(h, j - 1) / factorial(j - i);
      m.J(i, j) = ((j - i) % 2 == 0 ? 1.0 : -1.0) * std::pow(h, j - i) / factorial(j - i);
    }
  }
  m.D = Matrix::Zero(N, N);
  m.D(N - 1, N - 1) = 1.0;
  m.Q = Matrix::Zero(N, N);
  for (Eigen::Index i = 1; i < N; ++i) m.Q(i, i - 1) = 1.0;

  // 1-based: (K_h)_{ij} = (-1)^{n-j} h^{2n-i-j} / (2n-i-j+1)!
  m.K_h = Matrix::Zero(N, N);
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      m.K_h(i - 1, j - 1) =
          ((n - j) % 2 == 0 ? 1.0 : -1.0) * std::pow(h, 2 * n - i - j) / factorial(2 * n - i - j + 1);
  return m;
}

/// The matrices whose structure the identity checks inspect.
struct MsdIdentityTerms {
  Matrix T1, T2, T3;
  Matrix J2TMJ1;           // J2^T M J1, the scale for T2
  double trace_lhs = 0.0;  // Tr(D J2^T M J2) on the expanded matrices
  double trace_rhs = 0.0;  // n^2 d h^{2(n-1)}
  Matrix J_from_inverse;   // J2^{-1} J1
  Matrix K_from_inverse;   // h^{2n-2} (J2^T M J1)^{-1}
};

/// Builds T1, T2, T3 with J0 = h^{2-2n} J2 D J2^T and primes as entrywise h-derivatives.
inline MsdIdentityTerms msd_identity_terms(const MsdMatrices& m) {
  const double n = m.n;
  const double h = m.h;
  const double scale = std::pow(h, 2.0 - 2.0 * n);
  const Matrix& M = m.M;
  const Matrix& J1 = m.J1;
  const Matrix& J2 = m.J2;
  const Matrix J0 = scale * J2 * m.D * J2.transpose();

  MsdIdentityTerms t;
  t.T1 = (2 * n - 1) * J1.transpose() * M * J1 - 2 * h * m.J1_dh.transpose() * M * J1 -
         scale * J1.transpose() * M * J2 * m.D * J2.transpose() * M * J1;
  t.T2 = (1 - 2 * n) * J2.transpose() * M * J1 +
         h * (m.J2_dh.transpose() * M * J1 + J2.transpose() * M * m.J1_dh) - h * m.Q * J2.transpose() * M * J1 +
         J2.transpose() * M * J0 * M * J1;
  t.T3 = (2 * n - 1) * J2.transpose() * M * J2 - 2 * h * m.J2_dh.transpose() * M * J2 +
         2 * h * m.Q * J2.transpose() * M * J2 - scale * J2.transpose() * M * J2 * m.D * J2.transpose() * M * J2;
  t.J2TMJ1 = J2.transpose() * M * J1;
  t.trace_lhs = (m.expand(m.D) * m.expand(J2).transpose() * m.expand(M) * m.expand(J2)).trace();
  t.trace_rhs = n * n * static_cast<double>(m.block_dim) * std::pow(h, 2.0 * (n - 1));
  t.J_from_inverse = J2.partialPivLu().solve(J1);
  t.K_from_inverse = std::pow(h, 2.0 * n - 2.0) * t.J2TMJ1.partialPivLu().inverse();
  return t;
}

class KolmogorovCost {
 public:
  KolmogorovCost(int n, std::size_t block_dim, double h) : mats_(build_msd_matrices(n, block_dim, h)) {
    scale_ = std::pow(h, 2.0 - 2.0 * n);
  }
  explicit KolmogorovCost(MsdMatrices mats) : mats_(std::move(mats)) {
    scale_ = std::pow(mats_.h, 2.0 - 2.0 * mats_.n);
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mats_.n) * mats_.block_dim; }
  double h() const noexcept { return mats_.h; }
  const MsdMatrices& matrices() const noexcept { return mats_; }

  /// b_i = h^{i-1} (y_i - sum_{j>=i} h^{j-i}/(j-i)! x_j), blockwise in 1-based i.
  void residual(const double* x, const double* y, std::size_t component, double* b) const {
    const int n = mats_.n;
    const std::size_t d = mats_.block_dim;
    for (int i = 0; i < n; ++i) {
      double v = mats_.J1(i, i) * y[i * d + component];
      for (int j = i; j < n; ++j) v -= mats_.J2(i, j) * x[j * d + component];
      b[i] = v;
    }
  }

  double operator()(const double* x, const double* y) const {
    const int n = mats_.n;
    std::array<double, kMaxMsdOrder> b{};
    double c = 0.0;
    for (std::size_t comp = 0; comp < mats_.block_dim; ++comp) {
      residual(x, y, comp, b.data());
      for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += mats_.M(i, j) * b[j];
        c += b[i] * row;
      }
    }
    return scale_ * c;
  }

 private:
  MsdMatrices mats_;
  double scale_ = 1.0;
};

using CostSpec = std::variant<WeightedQuadraticCost, KramersCost, KolmogorovCost>;

inline std::size_t cost_dim(const CostSpec& c) {
  return std::visit([](const auto& k) { return k.dim(); }, c);
}
inline double cost_h(const CostSpec& c) {
  return std::visit([](const auto& k) { return k.h(); }, c);
}
inline double evaluate_cost(const CostSpec& c, const double* x, const double* y) {
  return std::visit([&](const auto& k) { return k(x, y); }, c);
}

// Point-wise convenience forms.

inline double cost_weighted(const Matrix& A, double h, const Vector& x, const Vector& y) {
  if (x.size() != A.rows() || y.size() != A.rows()) throw InvalidArgument("cost_weighted: dimension mismatch");
  return WeightedQuadraticCost(A, h)(x.data(), y.data());
}

inline double cost_kramers(double g_stiffness, double h, const Vector& from, const Vector& to) {
  if (from.size() != to.size() || from.size() % 2 != 0) throw InvalidArgument("cost_kramers: dimension mismatch");
  return KramersCost(static_cast<std::size_t>(from.size() / 2), h, g_stiffness)(from.data(), to.data());
}

inline double cost_kolmogorov(const MsdMatrices& mats, const Vector& x, const Vector& y) {
  const auto d = static_cast<Eigen::Index>(mats.n * mats.block_dim);
  if (x.size() != d || y.size() != d) throw InvalidArgument("cost_kolmogorov: dimension mismatch");
  return KolmogorovCost(mats)(x.data(), y.data());
}

}  // namespace ejko
