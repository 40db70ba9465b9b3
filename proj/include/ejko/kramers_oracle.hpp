#pragma once

// Exact transition density of the linear Kramers equation
//
//     d_t rho + v d_x rho = d_v (v rho + d_v rho)
//
// started from a Dirac mass at (x0, v0). At time t it is the Gaussian with mean
// (x0 + v0 (1 - e^-t), v0 e^-t) and covariance [[S3, S2], [S2, S1]].

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "ejko/error.hpp"
#include "ejko/grid_measure.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

struct GreenParams {
  double x0 = 0.0;
  double v0 = 0.0;
  /// Green-function time at which the scheme starts.
  double t0 = 0.14;

  void validate() const {
    if (!std::isfinite(x0) || !std::isfinite(v0)) throw InvalidArgument("Green function start point must be finite");
    if (!(t0 > 0.0) || !std::isfinite(t0)) throw InvalidArgument("Green function time offset t0 must be positive");
  }
};

struct SFunctions {
  double s1;  ///< 1 - e^{-2t}, velocity variance
  double s2;  ///< (1 - e^{-t})^2, covariance
  double s3;  ///< 2t - 3 + 4e^{-t} - e^{-2t}, position variance
  double det;  ///< s1 s3 - s2^2
};

inline constexpr double kGreenMinTime = 1e-6;

namespace detail {

// Power series of 2t - 3 + 4e^{-t} - e^{-2t}; the first nonzero term is 2t^3/3.
inline double s3_series(double t) {
  double sum = 0.0;
  double tk = t * t * t;
  double fact = 6.0;
  double sign = -1.0;   // (-1)^k
  double pow2 = -8.0;   // (-2)^k
  for (int k = 3; k < 60; ++k) {
    const double term = (4.0 * sign - pow2) / fact * tk;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    tk *= t;
    fact *= (k + 1);
    sign = -sign;
    pow2 *= -2.0;
  }
  return sum;
}

// Power series of t - 2 + 4e^{-t} - (t + 2)e^{-2t}; the first nonzero term is t^4/6.
inline double gap_series(double t) {
  double sum = 0.0;
  double tk = t * t * t * t;
  double fact = 24.0;      // k!
  double fact_m1 = 6.0;    // (k-1)!
  double sign = 1.0;       // (-1)^k
  double pow2 = 16.0;      // (-2)^k
  for (int k = 4; k < 60; ++k) {
    const double coef = 4.0 * sign / fact - (pow2 / -2.0) / fact_m1 - 2.0 * pow2 / fact;
    const double term = coef * tk;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    tk *= t;
    fact_m1 = fact;
    fact *= (k + 1);
    sign = -sign;
    pow2 *= -2.0;
  }
  return sum;
}

inline void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("Green function time must be positive, got " +
                                                              format_double(t));
}

inline double clamp_time(double t) {
  check_time(t);
  if (t >= kGreenMinTime) return t;
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::clog << "warning: Green function time " << format_double(t) << " clamped to " << kGreenMinTime << "\n";
  return kGreenMinTime;
}

}  // namespace detail

inline SFunctions s_functions(double t) {
  detail::check_time(t);
  const double em1 = std::expm1(-t);  // e^{-t} - 1
  SFunctions s{};
  s.s1 = -std::expm1(-2.0 * t);
  s.s2 = em1 * em1;
  s.s3 = t < 1.0 ? detail::s3_series(t) : 2.0 * t - 3.0 + 4.0 * std::exp(-t) - std::exp(-2.0 * t);
  s.det = s.s1 * s.s3 - s.s2 * s.s2;
  return s;
}

/// 2(t - 2 + 4e^{-t} - (t + 2)e^{-2t}), the closed form of s1 s3 - s2^2.
inline double printed_denominator(double t) {
  detail::check_time(t);
  if (t < 1.0) return 2.0 * detail::gap_series(t);
  return 2.0 * (t - 2.0 + 4.0 * std::exp(-t) - (t + 2.0) * std::exp(-2.0 * t));
}

/// Density at Green-function time t (t = t0 + elapsed scheme time).
inline double green_density(const GreenParams& p, double t, double x, double v) {
  t = detail::clamp_time(t);
  const SFunctions s = s_functions(t);
  const double det = printed_denominator(t);
  const double d1 = x - (p.x0 - p.v0 * std::expm1(-t));
  const double d2 = v - p.v0 * std::exp(-t);
  const double q = s.s1 * d1 * d1 - 2.0 * s.s2 * d1 * d2 + s.s3 * d2 * d2;
  return std::exp(-q / (2.0 * det)) / (2.0 * std::numbers::pi * std::sqrt(s.det));
}

/// Density samples at the points of a 2D (position, velocity) grid.
inline Vector exact_density(const GreenParams& p, double t, const UniformGrid& grid) {
  if (grid.dim() != 2) throw InvalidArgument("Kramers Green function needs a 2D grid, got dimension " +
                                             std::to_string(grid.dim()));
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double* z = grid.point(i);
    out[Eigen::Index(i)] = green_density(p, t, z[0], z[1]);
  }
  return out;
}

/// Weights lambda * density, renormalized; the captured mass is kept as the
/// measure's pre-normalization mass.
inline DiscreteMeasure sample_on_grid(const GreenParams& p, double t, GridPtr grid) {
  Vector density = exact_density(p, t, *grid);
  return DiscreteMeasure::from_density(std::move(grid), density);
}

}  // namespace ejko
