#pragma once

// Uniform grids on boxes of R^d, discrete probability measures on them, and the
// elementary functionals (moments, entropy, L1 distance, marginals).
//
// Storage order is row-major with the last axis varying fastest: the flat index of
// the multi-index (k_0, ..., k_{d-1}) is ((k_0 * n_1 + k_1) * n_2 + k_2) ...

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ejko/error.hpp"
#include "ejko/numerics.hpp"

namespace ejko {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Where grid points sit inside [lower, upper].
enum class GridConvention {
  CellCenter,  ///< spacing (hi - lo) / n, points at lo + (k + 1/2) spacing
  Endpoint,    ///< spacing (hi - lo) / (n - 1), points at lo + k spacing
};

class UniformGrid {
 public:
  UniformGrid(std::vector<Interval> bounds, std::vector<std::size_t> counts,
              GridConvention convention = GridConvention::CellCenter)
      : bounds_(std::move(bounds)), counts_(std::move(counts)), convention_(convention) {
    if (bounds_.empty()) throw InvalidArgument("grid needs at least one axis");
    if (bounds_.size() != counts_.size())
      throw InvalidArgument("grid bounds and counts have different lengths");
    spacing_.resize(dim());
    tile_volume_ = 1.0;
    size_ = 1;
    for (std::size_t a = 0; a < dim(); ++a) {
      const auto [lo, hi] = bounds_[a];
      if (!(std::isfinite(lo) && std::isfinite(hi)) || !(hi > lo))
        throw InvalidArgument("degenerate interval on axis " + std::to_string(a));
      if (counts_[a] < 2)
        throw InvalidArgument("axis " + std::to_string(a) + " needs at least 2 points");
      const double n = static_cast<double>(counts_[a]);
      spacing_[a] = convention_ == GridConvention::CellCenter ? (hi - lo) / n : (hi - lo) / (n - 1.0);
      tile_volume_ *= spacing_[a];
      size_ *= counts_[a];
    }
    coords_.resize(static_cast<Eigen::Index>(size_), static_cast<Eigen::Index>(dim()));
    std::vector<std::size_t> k(dim(), 0);
    for (std::size_t i = 0; i < size_; ++i) {
      for (std::size_t a = 0; a < dim(); ++a) coords_(Eigen::Index(i), Eigen::Index(a)) = axis_point(a, k[a]);
      for (std::size_t a = dim(); a-- > 0;) {
        if (++k[a] < counts_[a]) break;
        k[a] = 0;
      }
    }
  }

  std::size_t dim() const noexcept { return bounds_.size(); }
  /// Total number of points M.
  std::size_t size() const noexcept { return size_; }
  /// Volume lambda of one grid tile (product of spacings).
  double tile_volume() const noexcept { return tile_volume_; }
  double spacing(std::size_t axis) const { return spacing_.at(axis); }
  std::size_t count(std::size_t axis) const { return counts_.at(axis); }
  const Interval& bounds(std::size_t axis) const { return bounds_.at(axis); }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  GridConvention convention() const noexcept { return convention_; }

  double axis_point(std::size_t axis, std::size_t k) const {
    const double offset = convention_ == GridConvention::CellCenter ? 0.5 : 0.0;
    return bounds_[axis].lower + (static_cast<double>(k) + offset) * spacing_[axis];
  }

  /// M x d coordinates, one row per grid point in storage order.
  const RowMatrix& coordinates() const noexcept { return coords_; }
  const double* point(std::size_t i) const { return coords_.data() + i * dim(); }

  std::vector<std::size_t> unravel(std::size_t i) const {
    std::vector<std::size_t> k(dim());
    for (std::size_t a = dim(); a-- > 0;) {
      k[a] = i % counts_[a];
      i /= counts_[a];
    }
    return k;
  }

  bool operator==(const UniformGrid& o) const {
    if (dim() != o.dim() || counts_ != o.counts_ || convention_ != o.convention_) return false;
    for (std::size_t a = 0; a < dim(); ++a)
      if (bounds_[a].lower != o.bounds_[a].lower || bounds_[a].upper != o.bounds_[a].upper) return false;
    return true;
  }

 private:
  std::vector<Interval> bounds_;
  std::vector<std::size_t> counts_;
  GridConvention convention_;
  std::vector<double> spacing_;
  double tile_volume_ = 1.0;
  std::size_t size_ = 0;
  RowMatrix coords_;
};

using GridPtr = std::shared_ptr<const UniformGrid>;

inline GridPtr build_grid(std::vector<Interval> bounds, std::vector<std::size_t> counts,
                          GridConvention convention = GridConvention::CellCenter) {
  return std::make_shared<const UniformGrid>(std::move(bounds), std::move(counts), convention);
}

/// Nonnegative weights on the points of a grid, summing to one.
///
/// The constructor accepts any nonnegative weights with positive total and rescales
/// them; the total before rescaling is kept as `pre_normalization_mass()`.
class DiscreteMeasure {
 public:
  DiscreteMeasure(GridPtr grid, Vector weights) : grid_(std::move(grid)), weights_(std::move(weights)) {
    if (!grid_) throw InvalidArgument("measure needs a grid");
    if (static_cast<std::size_t>(weights_.size()) != grid_->size())
      throw InvalidArgument("weight vector length " + std::to_string(weights_.size()) +
                            " does not match grid size " + std::to_string(grid_->size()));
    CompensatedSum total;
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      const double w = weights_[i];
      if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidArgument("weight " + std::to_string(i) + " is negative or not finite");
      total.add(w);
    }
    mass_ = total.value();
    if (!(mass_ > 0.0)) throw InvalidArgument("measure has zero total mass");
    weights_ /= mass_;
  }

  /// Density samples (value per unit volume) at grid points, scaled by lambda and normalized.
  static DiscreteMeasure from_density(GridPtr grid, const Vector& density) {
    const double lambda = grid->tile_volume();
    return DiscreteMeasure(std::move(grid), density * lambda);
  }

  static DiscreteMeasure uniform(GridPtr grid) {
    const auto m = static_cast<Eigen::Index>(grid->size());
    return DiscreteMeasure(std::move(grid), Vector::Ones(m));
  }

  static DiscreteMeasure point_mass(GridPtr grid, std::size_t index) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(grid->size()));
    w[static_cast<Eigen::Index>(index)] = 1.0;
    return DiscreteMeasure(std::move(grid), std::move(w));
  }

  const UniformGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const Vector& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return grid_->size(); }
  double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
  /// Total mass supplied to the constructor before normalization.
  double pre_normalization_mass() const noexcept { return mass_; }
  /// Density with respect to the discrete Lebesgue measure: weights / lambda.
  Vector density() const { return weights_ / grid_->tile_volume(); }

 private:
  GridPtr grid_;
  Vector weights_;
  double mass_ = 1.0;
};

inline void require_same_grid(const UniformGrid& a, const UniformGrid& b) {
  if (&a != &b && !(a == b)) throw GridMismatch("measures live on different grids");
}

/// sum_i |x_i|^2 mu_i
inline double second_moment(const DiscreteMeasure& mu) {
  const auto& x = mu.grid().coordinates();
  CompensatedSum s;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s.add(x.row(i).squaredNorm() * mu.weights()[i]);
  return s.value();
}

/// sum_i mu_i log(mu_i / lambda), i.e. the entropy of the density weights/lambda
/// integrated against the discrete Lebesgue measure.
inline double discrete_entropy(const DiscreteMeasure& mu) {
  const double lambda = mu.grid().tile_volume();
  CompensatedSum s;
  for (Eigen::Index i = 0; i < mu.weights().size(); ++i) s.add(xlogy_ratio(mu.weights()[i], lambda));
  return s.value();
}

/// L1(Lambda) distance of the two densities, which equals sum_i |mu_i - nu_i|.
inline double l1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_grid(mu.grid(), nu.grid());
  CompensatedSum s;
  for (Eigen::Index i = 0; i < mu.weights().size(); ++i) s.add(std::abs(mu.weights()[i] - nu.weights()[i]));
  return s.value();
}

/// L1(Lambda) distance between the measure's density and a density sampled at grid points.
inline double l1_distance_to_density(const DiscreteMeasure& mu, const Vector& density) {
  if (density.size() != mu.weights().size()) throw GridMismatch("density sample has wrong length");
  const double lambda = mu.grid().tile_volume();
  CompensatedSum s;
  for (Eigen::Index i = 0; i < density.size(); ++i) s.add(std::abs(mu.weights()[i] - lambda * density[i]));
  return s.value();
}

/// Sums out every axis not in `axes` (0-based). Returns a measure on the sub-grid
/// spanned by `axes`, taken in increasing order.
inline DiscreteMeasure marginal(const DiscreteMeasure& mu, std::vector<std::size_t> axes) {
  const auto& g = mu.grid();
  if (axes.empty()) throw InvalidArgument("marginal needs a nonempty set of axes");
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end())
    throw InvalidArgument("marginal axes contain duplicates");
  if (axes.back() >= g.dim()) throw InvalidArgument("marginal axis out of range");

  std::vector<Interval> bounds;
  std::vector<std::size_t> counts;
  for (auto a : axes) {
    bounds.push_back(g.bounds(a));
    counts.push_back(g.count(a));
  }
  auto sub = build_grid(bounds, counts, g.convention());

  std::vector<CompensatedSum> acc(sub->size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto k = g.unravel(i);
    std::size_t j = 0;
    for (auto a : axes) j = j * g.count(a) + k[a];
    acc[j].add(mu[i]);
  }
  Vector w(static_cast<Eigen::Index>(sub->size()));
  for (std::size_t j = 0; j < sub->size(); ++j) w[Eigen::Index(j)] = acc[j].value();
  return DiscreteMeasure(std::move(sub), std::move(w));
}

/// Mean of the measure along one axis.
inline double axis_mean(const DiscreteMeasure& mu, std::size_t axis) {
  const auto& x = mu.grid().coordinates();
  CompensatedSum s;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s.add(x(i, Eigen::Index(axis)) * mu.weights()[i]);
  return s.value();
}

// CSV: header `index,coord_1,...,coord_d,weight`, one row per grid point.

inline void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu) {
  const auto& g = mu.grid();
  os << "index";
  for (std::size_t a = 0; a < g.dim(); ++a) os << ",coord_" << (a + 1);
  os << ",weight\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    os << i;
    const double* p = g.point(i);
    for (std::size_t a = 0; a < g.dim(); ++a) os << ',' << format_double(p[a]);
    os << ',' << format_double(mu[i]) << '\n';
  }
}

/// Reads a measure CSV written for `grid`. Coordinates are checked against the grid
/// to within a quarter of the spacing; weights are renormalized.
inline DiscreteMeasure read_measure_csv(std::istream& is, GridPtr grid) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("measure CSV is empty");
  std::string expected = "index";
  for (std::size_t a = 0; a < grid->dim(); ++a) expected += ",coord_" + std::to_string(a + 1);
  expected += ",weight";
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw InvalidArgument("measure CSV header mismatch: expected '" + expected + "'");

  Vector w = Vector::Zero(static_cast<Eigen::Index>(grid->size()));
  std::vector<bool> seen(grid->size(), false);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != grid->dim() + 2) throw InvalidArgument("measure CSV row has wrong column count");
    const auto idx = static_cast<std::size_t>(cells[0]);
    if (idx >= grid->size() || seen[idx]) throw InvalidArgument("measure CSV index out of range or repeated");
    const double* p = grid->point(idx);
    for (std::size_t a = 0; a < grid->dim(); ++a)
      if (std::abs(cells[a + 1] - p[a]) > 0.25 * grid->spacing(a))
        throw GridMismatch("measure CSV coordinates do not match the grid at index " + std::to_string(idx));
    w[Eigen::Index(idx)] = cells.back();
    seen[idx] = true;
    ++rows;
  }
  if (rows != grid->size()) throw InvalidArgument("measure CSV has " + std::to_string(rows) + " rows, grid has " +
                                                  std::to_string(grid->size()));
  return DiscreteMeasure(std::move(grid), std::move(w));
}

}  // namespace ejko
