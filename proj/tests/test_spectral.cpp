#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fracwave/regularity.hpp"
#include "fracwave/spectral.hpp"
#include "oracles.hpp"

using namespace fracwave;

namespace {

const QuadratureConfig kQ{};

SpaceTimePoint pt(double t, std::vector<double> x) { return {t, std::move(x)}; }

std::vector<double> dyadic(int lo, int hi) {
  std::vector<double> v;
  for (int e = lo; e <= hi; ++e) v.push_back(std::ldexp(1.0, e));
  return v;
}

}  // namespace

TEST(Model, ExistenceCondition) {
  EXPECT_THROW(ModelParams::make(0.7, 2.4, 3), DomainError);  // beta = 2H + 1
  EXPECT_THROW(ModelParams::make(0.7, 0.0, 1), DomainError);
  EXPECT_THROW(ModelParams::make(0.7, 2.0, 2), DomainError);  // beta = d, d > 1
  EXPECT_NO_THROW(ModelParams::make(0.7, 1.0, 1));            // spatial white noise
  EXPECT_NO_THROW(ModelParams::make(0.7, 2.3, 3));
  try {
    ModelParams::make(0.7, 2.4, 3);
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("existence condition"), std::string::npos);
  }
}

TEST(Model, DerivedIndices) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 3);
  EXPECT_NEAR(mp.gamma(), 1.4, 1e-15);
  EXPECT_NEAR(mp.Q(), 4.0 / 1.4, 1e-14);
  EXPECT_NEAR(mp.k - mp.Q(), 0.142857142857, 1e-11);
  EXPECT_TRUE(mp.sharpRegime());
  EXPECT_FALSE(ModelParams::make(0.8, 0.3, 1).sharpRegime());
}

TEST(Spectral, FourierG1) {
  EXPECT_DOUBLE_EQ(fourier_g1(0.7, 0.0), 0.7);
  EXPECT_NEAR(fourier_g1(2.0, 3.0), std::sin(6.0) / 3.0, 1e-16);
  EXPECT_THROW(fourier_g1(-1.0, 1.0), DomainError);
}

TEST(Spectral, NtAgainstBruteForce) {
  for (double H : {0.6, 0.85}) {
    const auto mp = ModelParams::make(H, 0.5, 1);
    for (double r : {0.3, 2.0, 9.0}) {
      auto s = [r](double u) { return std::sin(u * r); };
      const double ref = oracle::h_inner(s, s, 0.0, 1.3, H) / (r * r);
      EXPECT_NEAR(n_t(1.3, r, mp, kQ), ref, 1e-7 * ref) << H << " " << r;
    }
  }
}

TEST(Spectral, NtDecaysLikeInversePower) {
  // n_t(1, r) (1 + r^2)^{H + 1/2} stays within a factor 1.5 over [10, 100].
  // The oscillating part is about 2 Gamma(2H-1) / (r C) relative to the
  // leading term, so the factor grows as H -> 1 (1.71 at H = 0.9, r = 10).
  for (double H : {0.6, 0.7, 0.75}) {
    const auto mp = ModelParams::make(H, 0.5, 1);
    double lo = HUGE_VAL, hi = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double r = 10.0 * std::pow(10.0, i / 200.0);
      const double v = n_t(1.0, r, mp, kQ) * std::pow(1.0 + r * r, H + 0.5);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_TRUE(std::isfinite(hi));
    EXPECT_LE(hi / lo, 1.5) << H;
  }
}

TEST(Spectral, NtTailMatchesLargeR) {
  const auto mp = ModelParams::make(0.7, 1.0, 1);
  const auto tail = n_t_tail(1.0, mp);
  const double r = 5000.0;
  double m = 0.0;
  for (const auto& p : tail) m += p.coef * std::pow(r, p.power);
  // the rest oscillates with amplitude O(r^{-(2H+2)})
  EXPECT_NEAR(n_t(1.0, r, mp, kQ), m, 3.0 * std::pow(r, -(2 * 0.7 + 2)));
}

TEST(Spectral, TimeDomainVarianceMatchesRadialRoute) {
  const std::vector<std::tuple<double, double, int>> cases{
      {0.7, 0.5, 1}, {0.6, 1.0, 2}, {0.8, 1.7, 2}, {0.75, 1.5, 3}, {0.7, 2.0, 3}, {0.9, 2.5, 3}};
  for (auto [H, b, d] : cases) {
    const auto mp = ModelParams::make(H, b, d);
    const double td = variance(pt(0.8, std::vector<double>(d, 0.0)), mp, kQ);
    // the radial tail bound ignores cancellation, so slow decay needs a wide budget
    QuadratureConfig wide;
    wide.relTol = 1e-7;
    wide.maxPanels = 1000000;
    const double rad = variance_spectral(0.8, mp, wide).value;
    EXPECT_NEAR(td, rad, 1e-7 * rad) << H << " " << b << " " << d;
  }
}

TEST(Spectral, WhiteNoiseEndpointIsContinuous) {
  const auto a = ModelParams::make(0.7, 1.0, 1);
  const auto b = ModelParams::make(0.7, 1.0 - 1e-6, 1);
  EXPECT_NEAR(variance(pt(1, {0}), a, kQ), variance(pt(1, {0}), b, kQ), 1e-5);
}

TEST(Spectral, RadialRouteDetectsDivergence) {
  // beta >= 2H + 1: no finite variance
  const auto mp = ModelParams::unchecked(0.7, 2.6, 3);
  EXPECT_THROW(variance_spectral(1.0, mp, kQ), DivergenceError);
}

TEST(Spectral, CovarianceIsSymmetricAndBounded) {
  const auto mp = ModelParams::make(0.65, 0.9, 2);
  const auto p = pt(0.6, {0.1, -0.2}), q = pt(0.9, {0.3, 0.05});
  const double c = covariance(p, q, mp, kQ);
  EXPECT_NEAR(c, covariance(q, p, mp, kQ), 1e-12);
  EXPECT_LE(std::abs(c), std::sqrt(variance(p, mp, kQ) * variance(q, mp, kQ)));
  EXPECT_EQ(covariance(pt(0.0, {0, 0}), q, mp, kQ), 0.0);
}

TEST(Spectral, SpaceCovarianceAgainstRadialRoute) {
  // E u(t,x) u(t,x+z) = int mu(dxi) N_t(xi) e^{i xi.z}
  const auto mp = ModelParams::make(0.7, 0.6, 1);
  const double t = 1.0, z = 0.3;
  auto g = [&](double r) { return n_t(t, r, mp, kQ); };
  const double rad = radial_spectral_integral(g, {z}, mp, kQ, 2.0 * t).value;
  EXPECT_NEAR(covariance(pt(t, {0.0}), pt(t, {z}), mp, kQ), rad, 1e-7 * std::abs(rad));
}

TEST(Spectral, IncrementIdentities) {
  const auto mp = ModelParams::make(0.75, 1.2, 2);
  const double t = 0.6, h = 0.05;
  const auto parts = time_increment_decomposition(t, h, mp, kQ);
  const double tiv = time_increment_variance(t, h, mp, kQ);
  const auto p = pt(t, {0, 0}), q = pt(t + h, {0, 0});
  const double viaCov = variance(p, mp, kQ) + variance(q, mp, kQ) - 2 * covariance(p, q, mp, kQ);
  EXPECT_NEAR(parts.E1 + parts.E2 + 2 * parts.E3, tiv, 1e-10 * tiv);
  EXPECT_NEAR(viaCov, tiv, 1e-7 * tiv);
  const std::vector<double> z{0.03, -0.04};
  const double siv = space_increment_variance(t, z, mp, kQ);
  const double viaCov2 = 2 * variance(p, mp, kQ) - 2 * covariance(p, pt(t, z), mp, kQ);
  EXPECT_NEAR(siv, viaCov2, 1e-7 * siv);
  EXPECT_NEAR(increment_variance(p, pt(t, z), mp, kQ), siv, 1e-12 * siv);
}

TEST(Spectral, E2ScalesExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const double H = 0.55 + 0.4 * U(rng);
    const int d = 1 + static_cast<int>(3 * U(rng)) % 3;
    const double b = (0.05 + 0.9 * U(rng)) * std::min<double>(d, 2 * H + 1);
    const double h = 0.01 + 0.2 * U(rng);
    const auto mp = ModelParams::make(H, b, d);
    const double r = time_increment_decomposition(0.5, 2 * h, mp, kQ).E2 /
                     time_increment_decomposition(0.5, h, mp, kQ).E2;
    EXPECT_NEAR(r, std::pow(2.0, 2 * H + 2 - b), 1e-6 * r);
  }
}

TEST(Spectral, TimeExponent) {
  for (auto [H, b, d] : std::vector<std::tuple<double, double, int>>{{0.6, 0.5, 1}, {0.7, 1.0, 2}}) {
    const auto mp = ModelParams::make(H, b, d);
    const auto lags = dyadic(-10, -4);
    std::vector<double> v;
    for (double h : lags) v.push_back(time_increment_variance(0.5, h, mp, kQ));
    EXPECT_NEAR(fit_exponent(lags, v).slope, mp.gamma(), 0.05);
  }
}

TEST(Spectral, SpaceIncrementLeadingConstant) {
  // d = 1: E|u(t,x+z)-u(t,x)|^2 = c z^gamma + O(z^2) with
  // c = 4 alpha_H C t (-Gamma(-gamma) cos(pi gamma / 2)), C = int_0^inf v^{2H-2} cos v dv
  const auto mp = ModelParams::make(0.6, 0.5, 1);
  const double g = mp.gamma(), t = 1.0;
  const double c = 4.0 * mp.hurst.alpha() * frac_moment_cos_limit(mp.hurst) * t *
                   (-std::tgamma(-g) * std::cos(0.5 * std::numbers::pi * g));
  std::vector<double> rem;
  for (int e : {-12, -8}) {
    const double z = std::ldexp(1.0, e);
    rem.push_back((space_increment_variance(t, {z}, mp, kQ) - c * std::pow(z, g)) / (z * z));
  }
  // the remainder is a clean z^2 term: same coefficient four octaves apart
  EXPECT_NEAR(rem[0], rem[1], 0.05 * std::abs(rem[1]));
}

TEST(Spectral, JointMetric) {
  const auto mp = ModelParams::make(0.7, 1.0, 2);
  EXPECT_NEAR(joint_metric(pt(1, {0, 0}), pt(0.5, {0.3, 0.4}), mp),
              std::pow(0.5, 1.4) + std::pow(0.5, 1.4), 1e-15);
}
