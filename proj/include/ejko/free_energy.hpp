#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "ejko/error.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

/// Convex internal energy density u with u(0) = 0.
///   Boltzmann:   u(s) = s log s,        p(s) = s
///   PowerLaw(m): u(s) = s^m / (m - 1),  p(s) = s^m
class InternalEnergy {
 public:
  enum class Kind { Boltzmann, PowerLaw };

  static InternalEnergy boltzmann() { return InternalEnergy(Kind::Boltzmann, 1); }
  static InternalEnergy power_law(int m) {
    if (m < 2) throw InvalidArgument("power-law exponent must be an integer >= 2, got " + std::to_string(m));
    return InternalEnergy(Kind::PowerLaw, m);
  }

  Kind kind() const noexcept { return kind_; }
  int exponent() const noexcept { return m_; }

  double value(double s) const {
    check(s);
    if (kind_ == Kind::Boltzmann) return xlogx(s);
    return std::pow(s, m_) / (m_ - 1);
  }

  /// u'(s); -inf at s = 0 for Boltzmann.
  double derivative(double s) const {
    check(s);
    if (kind_ == Kind::Boltzmann) return std::log(s) + 1.0;
    return static_cast<double>(m_) / (m_ - 1) * std::pow(s, m_ - 1);
  }

  std::string name() const {
    return kind_ == Kind::Boltzmann ? std::string("boltzmann") : "power(" + std::to_string(m_) + ")";
  }

 private:
  InternalEnergy(Kind k, int m) : kind_(k), m_(m) {}
  static void check(double s) {
    if (!(s >= 0.0)) throw InvalidArgument("internal energy evaluated at negative density");
  }
  Kind kind_;
  int m_;
};

/// p(s) = u'(s) s - u(s).
inline double pressure(const InternalEnergy& u, double s) {
  if (!(s >= 0.0)) throw InvalidArgument("pressure evaluated at negative density");
  if (u.kind() == InternalEnergy::Kind::Boltzmann) return s;
  return std::pow(s, u.exponent());
}

/// Potential samples f(x_i) >= 0 together with an internal energy and the tile volume.
class FreeEnergySpec {
 public:
  FreeEnergySpec(GridPtr grid, Vector potential, InternalEnergy internal)
      : grid_(std::move(grid)), potential_(std::move(potential)), internal_(internal) {
    if (!grid_) throw InvalidArgument("free energy needs a grid");
    if (static_cast<std::size_t>(potential_.size()) != grid_->size())
      throw InvalidArgument("potential length does not match grid size");
    tile_volume_ = grid_->tile_volume();
    validate();
  }

  /// Gridless form, for callers working directly on weight vectors.
  FreeEnergySpec(double tile_volume, Vector potential, InternalEnergy internal)
      : potential_(std::move(potential)), internal_(internal), tile_volume_(tile_volume) {
    if (!(tile_volume_ > 0.0)) throw InvalidArgument("tile volume must be positive");
    validate();
  }

  static FreeEnergySpec zero_potential(GridPtr grid, InternalEnergy internal) {
    const auto m = static_cast<Eigen::Index>(grid->size());
    return FreeEnergySpec(std::move(grid), Vector::Zero(m), internal);
  }

  const Vector& potential() const noexcept { return potential_; }
  const InternalEnergy& internal() const noexcept { return internal_; }
  double tile_volume() const noexcept { return tile_volume_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(potential_.size()); }
  const GridPtr& grid_ptr() const noexcept { return grid_; }

 private:
  void validate() const {
    for (Eigen::Index i = 0; i < potential_.size(); ++i)
      if (!(potential_[i] >= 0.0) || !std::isfinite(potential_[i]))
        throw InvalidArgument("potential must be finite and nonnegative (index " + std::to_string(i) + ")");
  }

  GridPtr grid_;
  Vector potential_;
  InternalEnergy internal_;
  double tile_volume_ = 1.0;
};

/// sum_i f_i rho_i + lambda u(rho_i / lambda), on raw weights.
inline double discrete_free_energy(const FreeEnergySpec& spec, const Vector& rho) {
  if (static_cast<std::size_t>(rho.size()) != spec.size()) throw GridMismatch("free energy: length mismatch");
  const double lambda = spec.tile_volume();
  CompensatedSum s;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    s.add(spec.potential()[i] * rho[i]);
    s.add(lambda * spec.internal().value(rho[i] / lambda));
  }
  return s.value();
}

inline double discrete_free_energy(const FreeEnergySpec& spec, const DiscreteMeasure& rho) {
  if (spec.grid_ptr()) require_same_grid(*spec.grid_ptr(), rho.grid());
  return discrete_free_energy(spec, rho.weights());
}

namespace detail {

// Root of r - log_q + kappa f + kappa m/(m-1) (e^r / lambda)^(m-1) = 0, which is
// strictly increasing in r. Bracketed Newton with bisection fallback.
inline double power_law_prox_log(double log_q, double f, double kappa, double lambda, int m, std::size_t index) {
  const double log_lambda = std::log(lambda);
  const double coef = kappa * m / (m - 1.0);
  auto power = [&](double r) { return std::exp((m - 1.0) * (r - log_lambda)); };
  auto g = [&](double r) { return r - log_q + kappa * f + coef * power(r); };
  auto dg = [&](double r) { return 1.0 + kappa * m * power(r); };

  double hi = log_q;
  // rho_lo = q exp(-kappa (f + u'(q / lambda)))
  double lo = log_q - kappa * (f + m / (m - 1.0) * power(log_q));
  if (!std::isfinite(lo)) {
    // u'(q / lambda) overflowed; this bracket keeps both penalty terms below one.
    lo = std::min(log_q - kappa * f - 1.0, log_lambda + std::log((m - 1.0) / (kappa * m)) / (m - 1.0));
  }
  double g_lo = g(lo);
  const double g_hi = g(hi);
  if (!(g_lo <= 0.0) || !(g_hi >= 0.0)) throw RootFindError(index, "prox stationarity equation is not bracketed");
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;

  double r = 0.5 * (lo + hi);
  double last_step = hi - lo;
  for (int it = 0; it < 200; ++it) {
    const double val = g(r);
    if (val == 0.0) return r;
    if (val < 0.0)
      lo = r;
    else
      hi = r;
    double next = r - val / dg(r);
    // bisect when Newton leaves the bracket or fails to halve the previous step
    if (!(next > lo && next < hi) || 2.0 * std::abs(next - r) > last_step) next = 0.5 * (lo + hi);
    last_step = std::abs(next - r);
    if (std::abs(next - r) <= 1e-14 * std::max(1.0, std::abs(r)) || hi - lo <= 1e-14 * std::max(1.0, std::abs(r)))
      return next;
    r = next;
  }
  throw RootFindError(index, "no convergence within 200 iterations");
}

}  // namespace detail

/// KL-proximal map of kappa * Fbar in log coordinates: given log q, returns log rho where
/// rho minimizes KL(rho || q) + kappa Fbar(rho), i.e. each entry solves
///   log(rho_i / q_i) + kappa (f_i + u'(rho_i / lambda)) = 0.
inline Vector kl_prox_log(const FreeEnergySpec& spec, const Vector& log_q, double kappa) {
  if (static_cast<std::size_t>(log_q.size()) != spec.size()) throw GridMismatch("kl_prox: length mismatch");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidArgument("kl_prox: kappa must be positive and finite");
  const double lambda = spec.tile_volume();
  const auto& u = spec.internal();
  Vector out(log_q.size());
  for (Eigen::Index i = 0; i < log_q.size(); ++i) {
    if (!std::isfinite(log_q[i]))
      throw InvalidArgument("kl_prox: input entry " + std::to_string(i) + " is not strictly positive and finite");
    const double f = spec.potential()[i];
    if (u.kind() == InternalEnergy::Kind::Boltzmann) {
      // (1 + kappa) log rho = log q + kappa log lambda - kappa (f + 1)
      out[i] = (log_q[i] + kappa * std::log(lambda) - kappa * (f + 1.0)) / (1.0 + kappa);
    } else {
      out[i] = detail::power_law_prox_log(log_q[i], f, kappa, lambda, u.exponent(), static_cast<std::size_t>(i));
    }
  }
  return out;
}

/// KL-proximal map of kappa * Fbar on positive vectors.
inline Vector kl_prox(const FreeEnergySpec& spec, const Vector& q, double kappa) {
  Vector log_q(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0)) throw InvalidArgument("kl_prox: entry " + std::to_string(i) + " is not strictly positive");
    log_q[i] = std::log(q[i]);
  }
  return kl_prox_log(spec, log_q, kappa).array().exp().matrix();
}

}  // namespace ejko
