#include <gtest/gtest.h>

#include <cmath>

#include "ejko/kramers_oracle.hpp"

using namespace ejko;

TEST(SFunctions, SeriesMatchesClosedFormAtSwitch) {
  for (double t : {0.999999, 0.9, 0.5}) {
    const double direct = 2.0 * t - 3.0 + 4.0 * std::exp(-t) - std::exp(-2.0 * t);
    EXPECT_NEAR(s_functions(t).s3, direct, 1e-13);
    const double gap = 2.0 * (t - 2.0 + 4.0 * std::exp(-t) - (t + 2.0) * std::exp(-2.0 * t));
    EXPECT_NEAR(printed_denominator(t), gap, 1e-13);
  }
}

TEST(SFunctions, SmallTimeLeadingOrder) {
  const double t = 1e-4;
  const auto s = s_functions(t);
  EXPECT_NEAR(s.s1 / (2.0 * t), 1.0, 1e-3);
  EXPECT_NEAR(s.s2 / (t * t), 1.0, 1e-3);
  EXPECT_NEAR(s.s3 / (2.0 * t * t * t / 3.0), 1.0, 1e-3);
  EXPECT_NEAR(s.det / (t * t * t * t / 3.0), 1.0, 1e-3);
  EXPECT_GT(s.det, 0.0);
}

TEST(SFunctions, RejectsNonPositiveTime) {
  EXPECT_THROW(s_functions(0.0), InvalidArgument);
  EXPECT_THROW(s_functions(-1.0), InvalidArgument);
  EXPECT_THROW(printed_denominator(std::nan("")), InvalidArgument);
}

TEST(GreenDensity, MomentsFollowTheMeanAndCovariance) {
  const GreenParams p{0.2, 0.7, 0.14};
  const double t = 0.5;
  const auto s = s_functions(t);
  auto g = build_grid({{-2.0, 3.0}, {-4.0, 5.0}}, {500, 500});
  const Vector d = exact_density(p, t, *g);
  const double lambda = g->tile_volume();
  double mass = 0, mx = 0, mv = 0, vxx = 0, vxv = 0, vvv = 0;
  const double ex = p.x0 + p.v0 * (1.0 - std::exp(-t)), ev = p.v0 * std::exp(-t);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double w = d[Eigen::Index(i)] * lambda, x = g->point(i)[0], v = g->point(i)[1];
    mass += w;
    mx += w * x;
    mv += w * v;
    vxx += w * (x - ex) * (x - ex);
    vxv += w * (x - ex) * (v - ev);
    vvv += w * (v - ev) * (v - ev);
  }
  EXPECT_NEAR(mass, 1.0, 1e-6);
  EXPECT_NEAR(mx, ex, 1e-6);
  EXPECT_NEAR(mv, ev, 1e-6);
  // covariance [[s3, s2], [s2, s1]]
  EXPECT_NEAR(vxx, s.s3, 1e-5);
  EXPECT_NEAR(vxv, s.s2, 1e-5);
  EXPECT_NEAR(vvv, s.s1, 1e-5);
}

TEST(GreenDensity, PointSymmetricAboutOrigin) {
  const GreenParams p{};
  for (double t : {0.14, 0.3, 2.0})
    EXPECT_NEAR(green_density(p, t, 0.1, -0.4), green_density(p, t, -0.1, 0.4), 1e-12);
}

TEST(GreenDensity, TinyTimesAreClamped) {
  const GreenParams p{};
  EXPECT_EQ(green_density(p, 1e-9, 0.0, 0.0), green_density(p, kGreenMinTime, 0.0, 0.0));
  EXPECT_THROW(green_density(p, 0.0, 0.0, 0.0), InvalidArgument);
}

TEST(SampleOnGrid, NeedsTwoDimensionsAndNormalizes) {
  auto g1 = build_grid({{-1.0, 1.0}}, {10});
  EXPECT_THROW(exact_density(GreenParams{}, 0.2, *g1), InvalidArgument);
  auto g = build_grid({{-0.5, 0.5}, {-2.4, 2.4}}, {60, 40});
  const auto mu = sample_on_grid(GreenParams{}, 0.14, g);
  EXPECT_NEAR(mu.weights().sum(), 1.0, 1e-14);
  EXPECT_NEAR(mu.pre_normalization_mass(), 1.0, 1e-3);
}

TEST(GreenParams, Validation) {
  EXPECT_NO_THROW(GreenParams{}.validate());
  EXPECT_THROW((GreenParams{0.0, 0.0, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((GreenParams{std::nan(""), 0.0, 0.1}.validate()), InvalidArgument);
}
