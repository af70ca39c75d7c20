#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

#include "fracwave/potential.hpp"
#include "oracles.hpp"

using namespace fracwave;

namespace {

const std::vector<Box> kUnit{{{0.0}, {1.0}}};

double cap1d(double b, double mesh) {
  const auto c = discretize_boxes(kUnit, mesh);
  return capacity(c, {b, default_n0(c)}).capacity;
}

}  // namespace

TEST(Kernel, ThreeBranches) {
  EXPECT_NEAR(riesz_kernel(0.5, {1.5, 1.0}), std::pow(0.5, -1.5), 1e-15);
  EXPECT_NEAR(riesz_kernel(0.5, {0.0, 2.0}), std::log(4.0), 1e-15);
  EXPECT_EQ(riesz_kernel(123.0, {-0.2, 1.0}), 1.0);
  EXPECT_THROW(riesz_kernel(0.0, {0.5, 1.0}), DomainError);
  EXPECT_THROW(riesz_kernel(3.0, {0.0, 2.0}), DomainError);
}

TEST(Cells, DiscretizeBoxes) {
  const auto c = discretize_boxes({{{0.0, 0.0}, {1.0, 0.5}}}, 0.25);
  EXPECT_EQ(c.size(), 8u);
  EXPECT_EQ(c.dim(), 2u);
  const auto seg = discretize_boxes({{{0.0, 0.0}, {1.0, 0.0}}}, 0.25);
  EXPECT_EQ(seg.size(), 4u);
  EXPECT_EQ(seg.sides[0][1], 0.0);
  EXPECT_TRUE(discretize_boxes({}, 0.1).empty());
}

TEST(Energy, SegmentSelfEnergyAgainstQuadrature) {
  // E|X-Y|^{-b} for X, Y uniform on [0, s]: 2/s^2 int_0^s (s-w) w^{-b} dw
  for (double b : {0.2, 0.5, 0.8}) {
    const double s = 0.3;
    auto f = [&](double y) {
      const double w = s * std::pow(y, 1.0 / (1.0 - b));  // w^{-b} dw = s^{1-b}/(1-b) dy
      return (s - w);
    };
    const double ref = 2.0 / (s * s) * std::pow(s, 1.0 - b) / (1.0 - b) *
                       boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 10, 1e-13);
    EXPECT_NEAR(detail::self_energy({s}, {b, 1.0}), ref, 1e-10 * ref);
  }
}

TEST(Energy, SquareSelfEnergyMonteCarlo) {
  // E|X-Y|^{-1/2} on the unit square, by nested Gauss-Kronrod on the
  // difference density (1-|u|)(1-|v|) over [-1,1]^2
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [](double u) {
    auto g = [u](double v) { return 4.0 * (1 - u) * (1 - v) * std::pow(u * u + v * v, -0.25); };
    return gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 10, 1e-10);
  };
  const double ref = gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, 10, 1e-10);
  EXPECT_NEAR(detail::self_energy({1.0, 1.0}, {0.5, 1.0}), ref, 0.01 * ref);
}

TEST(Energy, UniformMeasure) {
  const auto c = discretize_boxes(kUnit, 0.1);
  const auto m = DiscreteMeasure::uniform(c);
  EXPECT_GT(energy(m, {0.5, 2.0}), 0.0);
  EXPECT_NEAR(energy(m, {-1.0, 1.0}), 1.0, 1e-12);
  DiscreteMeasure bad = m;
  bad.weights[0] += 0.5;
  EXPECT_THROW(energy(bad, {0.5, 2.0}), DomainError);
  DiscreteMeasure dup = m;
  dup.atoms[1] = dup.atoms[0];
  EXPECT_THROW(energy(dup, {0.5, 2.0}), OverlapError);
}

TEST(Capacity, NegativeIndexIsOne) {
  EXPECT_EQ(cap1d(-0.3, 0.1), 1.0);
  EXPECT_EQ(capacity(discretize_boxes({{{0, 0}, {2, 3}}}, 0.5), {-1.0, 1.0}).capacity, 1.0);
}

TEST(Capacity, IntervalAgainstClosedForm) {
  // cell-constant weights cannot follow the endpoint singularity of the
  // equilibrium density, so the error shrinks slowly but steadily
  for (double b : {0.3, 0.5, 0.7}) {
    const double ref = oracle::interval_capacity(b);
    const double e128 = std::abs(cap1d(b, 1.0 / 128) - ref), e256 = std::abs(cap1d(b, 1.0 / 256) - ref);
    EXPECT_LT(e256, 0.02 * ref) << b;
    EXPECT_LT(e256, e128) << b;
  }
}

TEST(Capacity, RefinementIsStable) {
  const double c128 = cap1d(0.5, 1.0 / 128), c256 = cap1d(0.5, 1.0 / 256);
  EXPECT_LT(std::abs(c256 - c128) / c256, 0.02);
}

TEST(Capacity, MonotoneUnderInclusion) {
  const double small = capacity(discretize_boxes({{{0.0, 0.0}, {0.5, 0.5}}}, 0.0625), {1.0, 2.0}).capacity;
  const double big = capacity(discretize_boxes({{{0.0, 0.0}, {1.0, 1.0}}}, 0.0625), {1.0, 2.0}).capacity;
  EXPECT_LT(small, big);
}

TEST(Capacity, SegmentHasZeroCapacityAboveItsDimension) {
  const auto seg = discretize_boxes({{{0.0, 0.0}, {1.0, 0.0}}}, 0.05);
  EXPECT_EQ(capacity(seg, {1.2, default_n0(seg)}).capacity, 0.0);
}

TEST(Capacity, WeightsFormProbability) {
  const auto c = discretize_boxes(kUnit, 1.0 / 64);
  const auto r = capacity(c, {0.5, default_n0(c)});
  double s = 0.0;
  for (double w : r.weights) {
    EXPECT_GE(w, 0.0);
    s += w;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_LE(r.gap, 1e-8);
  // equilibrium mass piles up at the ends
  EXPECT_GT(r.weights.front(), r.weights[32]);
}

TEST(Hausdorff, UnitIntervalOrderOne) {
  const auto c = discretize_boxes(kUnit, 1.0 / 256);
  const auto h = hausdorff_upper(c, 1.0, default_mesh_levels(1.0 / 256));
  EXPECT_LE(h.radiiSum, 1.0 + 1e-9);
  EXPECT_GE(h.radiiSum, 1.0 - 1e-9);
}

TEST(Hausdorff, NegativeOrderIsInfinite) {
  const auto c = discretize_boxes(kUnit, 0.1);
  EXPECT_TRUE(std::isinf(hausdorff_upper(c, -0.5, {0.1}).radiiSum));
}

TEST(Hausdorff, SubdimensionalOrderGoesToZero) {
  // a segment has H^{1.5} = 0: covering sums shrink with eps
  const auto c = discretize_boxes({{{0.0, 0.0}, {1.0, 0.0}}}, 1.0 / 128);
  const double coarse = hausdorff_upper(c, 1.5, {0.1}).radiiSum;
  const double fine = hausdorff_upper(c, 1.5, {0.1, 0.01}).radiiSum;
  EXPECT_LT(fine, coarse);
}

TEST(Hausdorff, LevelsMustDecrease) {
  const auto c = discretize_boxes(kUnit, 0.1);
  EXPECT_THROW(hausdorff_upper(c, 1.0, {0.1, 0.2}), DomainError);
  EXPECT_THROW(hausdorff_upper(c, 1.0, {}), DomainError);
}

TEST(Hitting, OrdersPerVariant) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 3);
  EXPECT_NEAR(hitting_order(mp, HittingVariant::SpaceTime), 3 - 4 / 1.4, 1e-12);
  EXPECT_NEAR(hitting_order(mp, HittingVariant::FixedTime), 3 - 2 / 1.4, 1e-12);
  EXPECT_NEAR(hitting_order(mp, HittingVariant::FixedSpace), 3 - 2 / 1.4, 1e-12);
}

TEST(Hitting, BoundsOrdered) {
  // k = 2, fixed time: order 2 - 2/1.4 in (0, 1)
  const auto mp = ModelParams::make(0.7, 1.0, 1, 2);
  const auto A = discretize_boxes({{{0.0, 0.0}, {0.5, 0.5}}}, 0.0625);
  const auto hb = hitting_bounds(A, mp, 0.0625, HittingVariant::FixedTime);
  EXPECT_GT(hb.capLower, 0.0);
  EXPECT_GT(hb.hausUpper, 0.0);
  EXPECT_TRUE(std::isfinite(hb.hausUpper));
}
