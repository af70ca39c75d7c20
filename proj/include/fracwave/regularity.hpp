#pragma once

// Log-log exponent fits and the hypotheses of the hitting criterion:
// variance floor, two-sided increments, conditional-variance floor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracwave/errors.hpp"
#include "fracwave/model.hpp"
#include "fracwave/sampler.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

struct ExponentFit {
  std::vector<double> lags;
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;
  double rSquared = 0.0;
  double predicted = std::numeric_limits<double>::quiet_NaN();
  std::size_t pointsUsed = 0;
};

/// Least squares of log value on log lag. Only lags in the middle 80% of
/// the log-lag range enter the fit (all of them if fewer than 4 would).
inline ExponentFit fit_exponent(const std::vector<double>& lags, const std::vector<double>& values,
                                double predicted = std::numeric_limits<double>::quiet_NaN(),
                                double trim = 0.1) {
  if (lags.size() != values.size()) throw DomainError("fit_exponent: size mismatch");
  if (lags.size() < 4) throw DomainError("fit_exponent: need at least 4 points");
  for (std::size_t i = 0; i < lags.size(); ++i)
    if (!(lags[i] > 0.0) || !(values[i] > 0.0))
      throw DomainError("fit_exponent: lags and values must be positive");
  std::vector<double> sorted = lags;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DegenerateInputError("fit_exponent: lags are not distinct");

  const double lmin = std::log(sorted.front()), lmax = std::log(sorted.back());
  const double lo = lmin + trim * (lmax - lmin), hi = lmax - trim * (lmax - lmin);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double lx = std::log(lags[i]);
    if (lx >= lo - 1e-12 && lx <= hi + 1e-12) {
      x.push_back(lx);
      y.push_back(std::log(values[i]));
    }
  }
  if (x.size() < 4) {
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < lags.size(); ++i) {
      x.push_back(std::log(lags[i]));
      y.push_back(std::log(values[i]));
    }
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  ExponentFit fit;
  fit.lags = lags;
  fit.values = values;
  fit.predicted = predicted;
  fit.pointsUsed = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.rSquared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return fit;
}

/// Var(U | V) from the two variances and rho^2 = E|U - V|^2.
inline double conditional_variance(double sigmaU2, double sigmaV2, double rho2) {
  if (!(sigmaU2 > 0.0) || !(sigmaV2 > 0.0)) throw DomainError("variances must be positive");
  if (rho2 < 0.0) throw DomainError("rho^2 must be non-negative");
  const double su = std::sqrt(sigmaU2), sv = std::sqrt(sigmaV2);
  const double lo = (su - sv) * (su - sv), hi = (su + sv) * (su + sv);
  const double slack = 1e-12 * hi;
  if (rho2 < lo - slack || rho2 > hi + slack)
    throw InvalidTriangleError("rho^2 outside [(sigma_U - sigma_V)^2, (sigma_U + sigma_V)^2]");
  const double r = std::clamp(rho2, lo, hi);
  return std::clamp((r - lo) * (hi - r) / (4.0 * sigmaV2), 0.0, sigmaU2);
}

struct BlxReport {
  double varianceFloor = 0.0;
  double incrementLower = 0.0;
  double incrementUpper = 0.0;
  double condVarConstant = 0.0;
  std::vector<double> alphas;
  double Q = 0.0;
  double dimensionIndex = 0.0;
  bool pass = false;
  std::string failure;
};

/// Empirical constants a1..a4 over all node pairs of a Gram matrix.
inline BlxReport check_blx(const GramMatrix& gram, const ModelParams& mp) {
  if (!mp.sharpRegime()) throw DomainError("check_blx needs beta > 2H - 1");
  const auto& C = gram.entries;
  const auto n = static_cast<std::size_t>(C.rows());
  if (gram.nodes.size() != n || n < 2) throw DomainError("check_blx: need at least two nodes");
  BlxReport rep;
  rep.alphas.assign(static_cast<std::size_t>(mp.d + 1), 0.5 * mp.gamma());
  rep.Q = mp.Q();
  rep.dimensionIndex = mp.k - rep.Q;

  auto where = [&](std::size_t i) {
    std::string s = "(t=" + format_double(gram.nodes[i].t) + ", x=";
    for (std::size_t c = 0; c < gram.nodes[i].x.size(); ++c)
      s += (c ? "," : "") + format_double(gram.nodes[i].x[c]);
    return s + ")";
  };
  auto fail = [&](const std::string& msg) {
    if (rep.failure.empty()) rep.failure = msg;
  };

  std::size_t argmin = 0;
  rep.varianceFloor = HUGE_VAL;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (C(ii, ii) < rep.varianceFloor) {
      rep.varianceFloor = C(ii, ii);
      argmin = i;
    }
  }
  if (!(rep.varianceFloor > 0.0))
    fail("condition i (variance floor) fails at node " + where(argmin));

  rep.incrementLower = HUGE_VAL;
  rep.incrementUpper = 0.0;
  rep.condVarConstant = HUGE_VAL;
  std::size_t lo_i = 0, lo_j = 0, cv_i = 0, cv_j = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double metric = joint_metric(gram.nodes[i], gram.nodes[j], mp);
      if (metric == 0.0) throw DomainError("check_blx: repeated node " + where(i));
      const double rho2 = std::max(0.0, C(ii, ii) + C(jj, jj) - 2.0 * C(ii, jj));
      const double ratio = rho2 / metric;
      if (ratio < rep.incrementLower) {
        rep.incrementLower = ratio;
        lo_i = i;
        lo_j = j;
      }
      rep.incrementUpper = std::max(rep.incrementUpper, ratio);
      for (int order = 0; order < 2; ++order) {
        const double su2 = order == 0 ? C(ii, ii) : C(jj, jj);
        const double sv2 = order == 0 ? C(jj, jj) : C(ii, ii);
        if (!(su2 > 0.0) || !(sv2 > 0.0)) continue;
        const double su = std::sqrt(su2), sv = std::sqrt(sv2);
        const double r = std::clamp(rho2, (su - sv) * (su - sv), (su + sv) * (su + sv));
        const double cv = conditional_variance(su2, sv2, r) / metric;
        if (cv < rep.condVarConstant) {
          rep.condVarConstant = cv;
          cv_i = order == 0 ? i : j;
          cv_j = order == 0 ? j : i;
        }
      }
    }
  if (rep.condVarConstant == HUGE_VAL) rep.condVarConstant = 0.0;
  if (!(rep.incrementLower > 0.0))
    fail("condition ii (increment lower bound) fails at pair " + where(lo_i) + " " + where(lo_j));
  if (!std::isfinite(rep.incrementUpper)) fail("condition ii (increment upper bound) is infinite");
  if (!(rep.condVarConstant > 0.0))
    fail("condition iii (conditional variance) fails at pair " + where(cv_i) + " | " + where(cv_j));
  rep.pass = rep.failure.empty();
  return rep;
}

inline void to_json(nlohmann::json& j, const ExponentFit& f) {
  j = nlohmann::json{{"lags", f.lags},         {"values", f.values},
                     {"slope", f.slope},       {"intercept", f.intercept},
                     {"rSquared", f.rSquared}, {"pointsUsed", f.pointsUsed}};
  if (std::isfinite(f.predicted)) j["predicted"] = f.predicted;
  else j["predicted"] = nullptr;
}

inline void to_json(nlohmann::json& j, const BlxReport& r) {
  j = nlohmann::json{{"varianceFloor", r.varianceFloor},
                     {"incrementConstants", {{"lower", r.incrementLower}, {"upper", r.incrementUpper}}},
                     {"condVarConstant", r.condVarConstant},
                     {"alphas", r.alphas},
                     {"Q", r.Q},
                     {"dimensionIndex", r.dimensionIndex},
                     {"pass", r.pass},
                     {"failure", r.failure}};
}

}  // namespace fracwave
