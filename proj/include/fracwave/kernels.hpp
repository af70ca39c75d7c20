#pragma once

// Fractional Brownian inner products: R_H, the one-sided fractional moments
// int_0^x v^{2H-2} {cos,sin}(v) dv, the H-norms of cos/sin restricted to an
// interval, and a generic 2-D inner product with the |u-v|^{2H-2} weight.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/quadrature.hpp"

namespace fracwave {

struct HurstParams {
  double H = 0.7;

  HurstParams() = default;
  explicit HurstParams(double h) : H(h) { validate(); }

  [[nodiscard]] double alpha() const { return H * (2.0 * H - 1.0); }
  void validate() const {
    if (!(H > 0.5 && H < 1.0)) throw DomainError("Hurst index must lie in (1/2, 1)");
  }
};

struct QuadratureConfig {
  double relTol = 1e-9;
  double absTol = 1e-12;
  std::size_t jacobiNodes = 32;
  std::size_t panelPerOscillation = 16;
  std::size_t maxPanels = 100000;

  void validate() const {
    if (!(relTol > 0.0) || !(absTol > 0.0)) throw DomainError("tolerances must be positive");
    if (jacobiNodes < 8) throw DomainError("jacobiNodes must be at least 8");
    if (panelPerOscillation == 0 || maxPanels == 0)
      throw DomainError("panel counts must be positive");
  }
};

inline double rh_covariance(double t, double s, const HurstParams& hp) {
  if (t < 0.0 || s < 0.0) throw DomainError("rh_covariance: negative time");
  const double e = 2.0 * hp.H;
  return 0.5 * (std::pow(t, e) + std::pow(s, e) - std::pow(std::abs(t - s), e));
}

namespace detail {

// int_X^inf v^{s-1} e^{iv} dv by its asymptotic expansion (s < 2, X large).
inline std::complex<double> upper_frac_moment(double x, double s) {
  const std::complex<double> I(0.0, 1.0);
  std::complex<double> sum = 0.0;
  std::complex<double> ipow = I;
  double coef = 1.0;
  double last = HUGE_VAL;
  for (int n = 0; n < 80; ++n) {
    const std::complex<double> term = ipow * coef;
    const double mag = std::abs(term);
    if (mag > last) break;
    sum += term;
    if (mag < 1e-18 * std::abs(sum)) break;
    last = mag;
    coef *= (s - 1.0 - n) / x;
    ipow *= I;
  }
  return std::exp(I * x) * std::pow(x, s - 1.0) * sum;
}

}  // namespace detail

/// E_s(x) = int_0^x v^{s-1} e^{iv} dv for 0 < s < 2.
inline std::complex<double> frac_moment(double x, double s, const QuadratureConfig& q) {
  if (x < 0.0) throw DomainError("frac_moment: negative upper limit");
  if (x == 0.0) return 0.0;
  constexpr double kSwitch = 40.0;
  const std::complex<double> I(0.0, 1.0);
  if (x > kSwitch) {
    const double g = std::tgamma(s);
    return g * std::exp(I * (0.5 * std::numbers::pi * s)) - detail::upper_frac_moment(x, s);
  }
  const double first = std::min(x, std::numbers::pi);
  const quad::Rule& jr = quad::gauss_jacobi_unit(q.jacobiNodes, s - 1.0);
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < jr.nodes.size(); ++i)
    acc += jr.weights[i] * std::exp(I * (first * jr.nodes[i]));
  acc *= std::pow(first, s);
  const quad::Rule& gl = quad::gauss_legendre(q.panelPerOscillation);
  for (double lo = first; lo < x; lo += std::numbers::pi) {
    const double hi = std::min(x, lo + std::numbers::pi);
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    std::complex<double> p = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double v = c + h * gl.nodes[i];
      p += gl.weights[i] * std::pow(v, s - 1.0) * std::exp(I * v);
    }
    acc += h * p;
  }
  return acc;
}

inline double frac_moment_cos(double x, const HurstParams& hp, const QuadratureConfig& q) {
  return frac_moment(x, 2.0 * hp.H - 1.0, q).real();
}

inline double frac_moment_sin(double x, const HurstParams& hp, const QuadratureConfig& q) {
  return frac_moment(x, 2.0 * hp.H - 1.0, q).imag();
}

/// int_0^inf v^{2H-2} cos v dv.
inline double frac_moment_cos_limit(const HurstParams& hp) {
  const double s = 2.0 * hp.H - 1.0;
  return std::tgamma(s) * std::cos(0.5 * std::numbers::pi * s);
}

namespace detail {

struct NormIntegrals {
  double P;    // int_0^X cos(v) v^{2H-2} (X - v) dv
  double Q;    // int_0^X v^{2H-2} sin(X - v) dv
  double PmQ;  // P - Q without cancellation
};

// Coefficient of X^{2H+2j} in P - Q.
inline double pmq_coef(int j, double lam) {
  double fact2j = 1.0;
  for (int i = 2; i <= 2 * j; ++i) fact2j *= i;
  const double p = lam + 2.0 * j + 1.0;
  const double first = 1.0 / (p * (p + 1.0) * fact2j);
  double prod = 1.0;
  for (int i = 1; i <= 2 * j + 2; ++i) prod *= lam + i;
  const double sign = (j % 2 == 0) ? 1.0 : -1.0;
  return sign * (first - 1.0 / prod);
}

inline NormIntegrals norm_integrals(double x, const HurstParams& hp, const QuadratureConfig& q) {
  const double s = 2.0 * hp.H - 1.0;
  const std::complex<double> e1 = frac_moment(x, s, q);
  const std::complex<double> e2 = frac_moment(x, s + 1.0, q);
  NormIntegrals r{};
  r.P = x * e1.real() - e2.real();
  r.Q = std::sin(x) * e1.real() - std::cos(x) * e1.imag();
  if (x <= 2.0) {
    const double lam = 2.0 * hp.H - 2.0;
    double sum = 0.0;
    for (int j = 1; j < 40; ++j) {
      const double term = pmq_coef(j, lam) * std::pow(x, lam + 2.0 * j + 2.0);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    r.PmQ = sum;
  } else {
    r.PmQ = r.P - r.Q;
  }
  return r;
}

}  // namespace detail

/// Squared H-norm of cos restricted to (a, b).
inline double h_norm_cos(double a, double b, const HurstParams& hp, const QuadratureConfig& q) {
  if (!(a < b)) throw DomainError("h_norm_cos: need a < b");
  const auto li = detail::norm_integrals(b - a, hp, q);
  const double c = std::cos(0.5 * (a + b));
  return hp.alpha() * (li.PmQ + 2.0 * c * c * li.Q);
}

/// Squared H-norm of sin restricted to (a, b).
inline double h_norm_sin(double a, double b, const HurstParams& hp, const QuadratureConfig& q) {
  if (!(a < b)) throw DomainError("h_norm_sin: need a < b");
  const auto li = detail::norm_integrals(b - a, hp, q);
  const double sn = std::sin(0.5 * (a + b));
  return hp.alpha() * (li.PmQ + 2.0 * sn * sn * li.Q);
}

/// 2 alpha_H int_0^{X} cos(v) v^{2H-2} (X - v) dv, the sum of both norms.
inline double h_norm_sum(double x, const HurstParams& hp, const QuadratureConfig& q) {
  return 2.0 * hp.alpha() * detail::norm_integrals(x, hp, q).P;
}

/// lim_{X->0} X^{-(2H+2)} h_norm_sin(0, X).
inline double h_norm_sin_origin_coef(const HurstParams& hp) {
  const double lam = 2.0 * hp.H - 2.0;
  const double b = 1.0 / ((lam + 1.0) * (lam + 2.0));
  return hp.alpha() * (detail::pmq_coef(1, lam) + 0.5 * b);
}

/// alpha_H int_a^b int_c^d f(u) g(v) |u-v|^{2H-2} du dv.
///
/// The square is rotated to w = u - v, sigma = u + v. The inner sigma
/// integral is smooth; the outer one carries |w|^{2H-2}, handled with
/// Gauss-Jacobi on the panels touching w = 0.
template <class F, class G>
double h_inner_product_2d(F&& f, double a, double b, G&& g, double c, double d,
                          const HurstParams& hp, const QuadratureConfig& q) {
  if (!(a <= b) || !(c <= d)) throw DomainError("h_inner_product_2d: reversed interval");
  if (a == b || c == d) return 0.0;
  const double lam = 2.0 * hp.H - 2.0;
  const double scale = std::max(b - a, d - c);
  const double inner_abs = q.absTol * 1e-3 / scale;
  const double inner_rel = q.relTol * 1e-2;

  auto psi = [&](double w) {
    const double lo = std::max(2.0 * a - w, 2.0 * c + w);
    const double hi = std::min(2.0 * b - w, 2.0 * d + w);
    if (!(hi > lo)) return 0.0;
    auto inner = [&](double sg) { return f(0.5 * (sg + w)) * g(0.5 * (sg - w)); };
    return 0.5 * quad::adaptive_gl(inner, lo, hi, inner_rel, inner_abs, q.maxPanels).value;
  };
  auto weighted = [&](double w) { return std::pow(std::abs(w), lam) * psi(w); };

  const double wlo = a - d, whi = b - c;
  std::vector<double> br{wlo, whi};
  for (double v : {0.0, a - c, b - d})
    if (v > wlo && v < whi) br.push_back(v);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  const quad::Rule& jr = quad::gauss_jacobi_unit(q.jacobiNodes, lam);
  auto jacobi = [&](double len, double sign) {
    double s = 0.0;
    for (std::size_t i = 0; i < jr.nodes.size(); ++i) s += jr.weights[i] * psi(sign * len * jr.nodes[i]);
    return s * std::pow(len, lam + 1.0);
  };

  std::size_t budget = q.maxPanels;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double lo = br[i], hi = br[i + 1];
    if (lo == 0.0 || hi == 0.0) {
      const double sign = (hi == 0.0) ? -1.0 : 1.0;
      double len = hi - lo;
      double far = 0.0;
      double whole = jacobi(len, sign);
      for (int depth = 0;; ++depth) {
        const double half = 0.5 * len;
        const double near = jacobi(half, sign);
        const double a1 = sign > 0 ? half : -len, b1 = sign > 0 ? len : -half;
        const auto mid = quad::adaptive_gl(weighted, a1, b1, q.relTol, q.absTol, budget);
        budget -= std::min(budget - 1, mid.panels);
        const double refined = near + mid.value;
        if (std::abs(refined - whole) <= std::max(q.absTol, q.relTol * std::abs(refined + far))) {
          far += refined;
          break;
        }
        if (depth > 60 || budget <= 1)
          throw ConvergenceError("h_inner_product_2d: refinement budget exhausted near the diagonal");
        far += mid.value;
        whole = near;
        len = half;
      }
      total += far;
    } else {
      const auto r = quad::adaptive_gl(weighted, lo, hi, q.relTol, q.absTol, budget);
      budget -= std::min(budget - 1, r.panels);
      total += r.value;
    }
  }
  return hp.alpha() * total;
}

}  // namespace fracwave
