#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace ejko {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Neumaier-compensated running sum. Order of `add` calls fixes the result bit-for-bit.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// s log s with the 0 log 0 = 0 convention.
inline double xlogx(double s) noexcept { return s > 0.0 ? s * std::log(s) : 0.0; }

/// x log(x / y) with 0 log(0 / y) = 0.
inline double xlogy_ratio(double x, double y) noexcept { return x > 0.0 ? x * std::log(x / y) : 0.0; }

/// Shortest round-trippable decimal: 17 significant digits, '.' separator.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline bool relative_close(double a, double b, double rtol, double atol = 0.0) noexcept {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

}  // namespace ejko
