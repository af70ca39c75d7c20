#pragma once

// Quadrature primitives: Gauss-Legendre and Gauss-Jacobi rules, an adaptive
// Gauss-Legendre integrator, and a double-exponential (tanh-sinh) integrator
// for panels with algebraic endpoint singularities of unknown order.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fracwave/errors.hpp"

namespace fracwave::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline Rule make_gauss_legendre(std::size_t n) {
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Golub-Welsch for the Jacobi weight (1-y)^a (1+y)^b on [-1,1].
inline Rule make_gauss_jacobi(std::size_t n, double a, double b) {
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i);
    const double s = 2.0 * k + a + b;
    if (i == 0) {
      diag[0] = (b - a) / (a + b + 2.0);
    } else {
      diag[i] = (b * b - a * a) / (s * (s + 2.0));
    }
    if (i + 1 < n) {
      const double m = k + 1.0;
      const double sm = 2.0 * m + a + b;
      const double num = 4.0 * m * (m + a) * (m + b) * (m + a + b);
      const double den = sm * sm * (sm + 1.0) * (sm - 1.0);
      sub[i] = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub.head(n > 1 ? n - 1 : 0),
                                Eigen::ComputeEigenvectors);
  const double mu0 = std::exp((a + b + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) +
                              std::lgamma(b + 1.0) - std::lgamma(a + b + 2.0));
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    const double v0 = solver.eigenvectors()(0, static_cast<Eigen::Index>(i));
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1]. Cached per thread.
inline const Rule& gauss_legendre(std::size_t n) {
  thread_local std::map<std::size_t, Rule> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
  return it->second;
}

/// n-point rule for  int_0^1 x^alpha f(x) dx,  alpha > -1. Cached per thread.
inline const Rule& gauss_jacobi_unit(std::size_t n, double alpha) {
  thread_local std::map<std::pair<std::size_t, double>, Rule> cache;
  const auto key = std::make_pair(n, alpha);
  auto it = cache.find(key);
  if (it == cache.end()) {
    if (!(alpha > -1.0)) throw DomainError("gauss_jacobi_unit: alpha must exceed -1");
    Rule r = detail::make_gauss_jacobi(n, 0.0, alpha);
    const double scale = std::exp(-(alpha + 1.0) * std::log(2.0));
    for (std::size_t i = 0; i < n; ++i) {
      r.nodes[i] = 0.5 * (1.0 + r.nodes[i]);
      r.weights[i] *= scale;
    }
    it = cache.emplace(key, std::move(r)).first;
  }
  return it->second;
}

/// Fixed Gauss-Legendre on [a, b].
template <class F>
double fixed_gl(F&& f, double a, double b, std::size_t n) {
  const Rule& r = gauss_legendre(n);
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += r.weights[i] * f(c + h * r.nodes[i]);
  return s * h;
}

struct Result {
  double value = 0.0;
  double error = 0.0;
  std::size_t panels = 0;
};

/// Adaptive bisection with an n-point Gauss-Legendre rule; a panel is
/// accepted when the whole-panel and two-half estimates agree.
template <class F>
Result adaptive_gl(F&& f, double a, double b, double rel_tol, double abs_tol,
                   std::size_t max_panels, std::size_t n = 16) {
  Result res;
  if (a == b) return res;
  struct Panel {
    double a, b, whole;
  };
  std::vector<Panel> stack;
  stack.push_back({a, b, fixed_gl(f, a, b, n)});
  const double total_len = std::abs(b - a);
  while (!stack.empty()) {
    Panel p = stack.back();
    stack.pop_back();
    const double m = 0.5 * (p.a + p.b);
    const double left = fixed_gl(f, p.a, m, n);
    const double right = fixed_gl(f, m, p.b, n);
    const double refined = left + right;
    const double err = std::abs(refined - p.whole);
    const double local_abs = abs_tol * std::abs(p.b - p.a) / total_len;
    ++res.panels;
    if (err <= std::max(local_abs, rel_tol * std::abs(refined)) ||
        std::abs(p.b - p.a) < 1e-14 * total_len) {
      res.value += refined;
      res.error += err;
      continue;
    }
    if (res.panels + stack.size() > max_panels)
      throw ConvergenceError("adaptive_gl: panel budget exhausted");
    stack.push_back({p.a, m, left});
    stack.push_back({m, p.b, right});
  }
  return res;
}

/// A quadrature abscissa stored relative to the nearer panel end, so that
/// integrands singular at a panel end can form exact small differences.
struct PanelPoint {
  double anchor;
  double offset;
  [[nodiscard]] double value() const { return anchor + offset; }
  /// c - x, computed as (c - anchor) - offset.
  [[nodiscard]] double from(double c) const { return (c - anchor) - offset; }
};

namespace detail {

// One tanh-sinh level: sum over t = h*(odd or all) multiples.
template <class F>
double tanh_sinh_sum(F& f, double a, double b, double h, bool odd_only) {
  const double half = 0.5 * (b - a);
  double s = 0.0;
  const double step = odd_only ? 2.0 * h : h;
  double t = odd_only ? h : 0.0;
  for (;; t += step) {
    const double u = 0.5 * std::numbers::pi * std::sinh(t);
    const double e = std::exp(-2.0 * u);
    const double dist = 2.0 * e / (1.0 + e);  // 1 - tanh(u)
    if (dist * half == 0.0 || !(dist > 0.0)) break;
    const double w = 0.5 * std::numbers::pi * std::cosh(t) * 4.0 * e / ((1.0 + e) * (1.0 + e));
    const double off = half * dist;
    if (t == 0.0) {
      s += w * f(PanelPoint{a, half});
      continue;
    }
    double fr = 0.0, fl = 0.0;
    if (off > 0.0) {
      fr = f(PanelPoint{b, -off});
      fl = f(PanelPoint{a, off});
    }
    s += w * (fl + fr);
    if (w * (std::abs(fl) + std::abs(fr)) < 1e-300 && t > 3.0) break;
  }
  return s * half;
}

}  // namespace detail

/// Tanh-sinh on [a, b]. The integrand receives a PanelPoint.
template <class F>
Result tanh_sinh_panel(F&& f, double a, double b, double rel_tol, double abs_tol,
                       int max_level = 8) {
  Result res;
  if (a == b) return res;
  double h = 1.0;
  double sum = detail::tanh_sinh_sum(f, a, b, h, false);
  double prev = sum * h;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    sum += detail::tanh_sinh_sum(f, a, b, h, true);
    const double cur = sum * h;
    const double err = std::abs(cur - prev);
    prev = cur;
    res.value = cur;
    res.error = err;
    res.panels = 1;
    if (level >= 3 && err <= std::max(abs_tol, rel_tol * std::abs(cur))) return res;
  }
  res.panels = 0;  // not converged
  return res;
}

/// Tanh-sinh over consecutive breakpoints; panels that fail to converge are
/// bisected until `max_panels` is reached.
template <class F>
Result tanh_sinh(F&& f, const std::vector<double>& breaks, double rel_tol, double abs_tol,
                 std::size_t max_panels, int max_level = 8) {
  Result total;
  if (breaks.size() < 2) return total;
  struct Panel {
    double a, b;
    int depth;
  };
  std::vector<Panel> todo;
  for (std::size_t i = breaks.size() - 1; i > 0; --i)
    if (breaks[i] > breaks[i - 1]) todo.push_back({breaks[i - 1], breaks[i], 0});
  const double span = breaks.back() - breaks.front();
  std::size_t used = 0;
  while (!todo.empty()) {
    const Panel p = todo.back();
    todo.pop_back();
    const double local_abs = abs_tol * (p.b - p.a) / span;
    Result r = tanh_sinh_panel(f, p.a, p.b, rel_tol, local_abs, max_level);
    ++used;
    if (r.panels == 0) {
      if (used + todo.size() + 2 > max_panels || p.depth > 40)
        throw ConvergenceError("tanh_sinh: panel budget exhausted on [" + std::to_string(p.a) +
                               ", " + std::to_string(p.b) + "]");
      const double m = 0.5 * (p.a + p.b);
      todo.push_back({m, p.b, p.depth + 1});
      todo.push_back({p.a, m, p.depth + 1});
      continue;
    }
    total.value += r.value;
    total.error += r.error;
  }
  total.panels = used;
  return total;
}

}  // namespace fracwave::quad
