#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fracwave/regularity.hpp"
#include "oracles.hpp"

using namespace fracwave;

TEST(Fit, ExactPowerLaw) {
  std::vector<double> lags, vals;
  for (int e = -10; e <= -4; ++e) {
    lags.push_back(std::ldexp(1.0, e));
    vals.push_back(3.0 * std::pow(lags.back(), 1.37));
  }
  const auto f = fit_exponent(lags, vals, 1.4);
  EXPECT_NEAR(f.slope, 1.37, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_NEAR(f.rSquared, 1.0, 1e-12);
  EXPECT_EQ(f.pointsUsed, 5u);  // the two extreme lags are trimmed
  EXPECT_EQ(f.predicted, 1.4);
}

TEST(Fit, ConstantValues) {
  const auto f = fit_exponent({1, 2, 4, 8}, {5, 5, 5, 5});
  EXPECT_NEAR(f.slope, 0.0, 1e-15);
  EXPECT_EQ(f.rSquared, 1.0);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit_exponent({1, 2, 2, 4}, {1, 2, 3, 4}), DegenerateInputError);
  EXPECT_THROW(fit_exponent({1, 2, 3}, {1, 2, 3}), DomainError);
  EXPECT_THROW(fit_exponent({1, 2, 3, 4}, {1, -2, 3, 4}), DomainError);
  EXPECT_THROW(fit_exponent({1, 2, 3, 4}, {1, 2, 3}), DomainError);
}

TEST(Fit, NoisyDataStillClose) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0.0, 0.01);
  std::vector<double> lags, vals;
  for (int i = 0; i < 40; ++i) {
    lags.push_back(std::pow(10.0, -3.0 + 2.0 * i / 39.0));
    vals.push_back(std::pow(lags.back(), 0.8) * std::exp(N(rng)));
  }
  const auto f = fit_exponent(lags, vals);
  EXPECT_NEAR(f.slope, 0.8, 0.02);
  EXPECT_GT(f.rSquared, 0.99);
}

TEST(ConditionalVariance, MatchesRegressionFormula) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double su2 = 0.01 + 5 * U(rng), sv2 = 0.01 + 5 * U(rng);
    const double su = std::sqrt(su2), sv = std::sqrt(sv2);
    const double lo = (su - sv) * (su - sv), hi = (su + sv) * (su + sv);
    const double rho2 = lo + (hi - lo) * U(rng);
    EXPECT_NEAR(conditional_variance(su2, sv2, rho2), oracle::conditional_variance(su2, sv2, rho2),
                1e-12 * std::max(1.0, su2));
  }
}

TEST(ConditionalVariance, Boundaries) {
  EXPECT_NEAR(conditional_variance(1.0, 1.0, 0.0), 0.0, 1e-15);  // U = V
  EXPECT_NEAR(conditional_variance(1.0, 1.0, 2.0), 1.0, 1e-15);  // independent
  EXPECT_THROW(conditional_variance(1.0, 1.0, 4.1), InvalidTriangleError);
  EXPECT_THROW(conditional_variance(4.0, 1.0, 0.5), InvalidTriangleError);
  EXPECT_THROW(conditional_variance(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(conditional_variance(1.0, 1.0, -1.0), DomainError);
}

namespace {

GridSpec grid6() {
  GridSpec g;
  for (int i = 0; i < 6; ++i) g.times.push_back(0.5 + 0.1 * i);
  for (int i = 0; i < 6; ++i) g.sites.push_back({-0.25 + 0.1 * i});
  return g;
}

}  // namespace

TEST(Blx, PositiveConstantsInSharpRegime) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 1);
  const auto rep = check_blx(assemble_gram(grid6(), mp), mp);
  EXPECT_TRUE(rep.pass) << rep.failure;
  EXPECT_GT(rep.varianceFloor, 0.0);
  EXPECT_GT(rep.incrementLower, 0.0);
  EXPECT_GT(rep.incrementUpper, rep.incrementLower);
  EXPECT_GT(rep.condVarConstant, 0.0);
  EXPECT_NEAR(rep.Q, 4.0 / 1.4, 1e-12);
  ASSERT_EQ(rep.alphas.size(), 2u);
  EXPECT_NEAR(rep.alphas[0], 0.7, 1e-12);
  EXPECT_LE(rep.incrementUpper / rep.incrementLower, 10.0);
}

TEST(Blx, DimensionIndexForThreeComponents) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 3);
  GridSpec g;
  g.times = {0.5, 1.0};
  g.sites = {{0.0}, {0.3}};
  EXPECT_NEAR(check_blx(assemble_gram(g, mp), mp).dimensionIndex, 3.0 - 4.0 / 1.4, 1e-12);
}

TEST(Blx, ZeroVarianceNodeFailsFloor) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 1);
  GridSpec g;
  g.times = {0.0, 0.5};
  g.sites = {{0.0}, {0.3}};
  const auto rep = check_blx(assemble_gram(g, mp), mp);
  EXPECT_FALSE(rep.pass);
  EXPECT_NE(rep.failure.find("condition i "), std::string::npos);
  EXPECT_NE(rep.failure.find("t=0"), std::string::npos);
}

TEST(Blx, RejectsNonSharpRegime) {
  const auto mp = ModelParams::make(0.8, 0.3, 1, 1);
  GridSpec g;
  g.times = {0.5, 1.0};
  g.sites = {{0.0}};
  EXPECT_THROW(check_blx(assemble_gram(g, mp), mp), DomainError);
}

TEST(Blx, JsonShape) {
  const auto mp = ModelParams::make(0.7, 1.0, 1, 1);
  const nlohmann::json j = check_blx(assemble_gram(grid6(), mp), mp);
  EXPECT_TRUE(j.contains("incrementConstants"));
  EXPECT_TRUE(j["incrementConstants"].contains("lower"));
  EXPECT_EQ(j["pass"], true);
}
