#pragma once

// Covariance of the mild solution.
//
// The spatial frequency integral int mu(dxi) sin(a|xi|) sin(b|xi|) |xi|^{-2}
// cos(xi.z) has a closed form Phi_d(a, b, |z|) for d = 1, 2, 3, so every
// second moment reduces to
//
//   alpha_H int int |u-v|^{2H-2} Phi_d(A-u, B-v, rho) du dv
//
// over a rectangle.  Rotating to w = u-v leaves an analytic integral in
// u+v and a 1-D integral in w with an algebraic singularity at w = 0 and
// kinks at a known finite set of points.  Signed sums of such rectangles
// are integrated as one integrand so increments cancel pointwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/kernels.hpp"
#include "fracwave/model.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/special.hpp"

namespace fracwave {

inline double fourier_g1(double t, double r) {
  if (t < 0.0 || r < 0.0) throw DomainError("fourier_g1: negative argument");
  if (r == 0.0) return t;
  return std::sin(t * r) / r;
}

/// N_t(r) = alpha_H r^{-2} int_0^t int_0^t sin(ur) sin(vr) |u-v|^{2H-2} du dv.
inline double n_t(double t, double r, const ModelParams& mp, const QuadratureConfig& q) {
  if (!(t > 0.0)) throw DomainError("n_t: need t > 0");
  if (r < 0.0) throw DomainError("n_t: negative frequency");
  const double e = 2.0 * mp.H() + 2.0;
  if (r == 0.0 || t * r < 1e-12) return h_norm_sin_origin_coef(mp.hurst) * std::pow(t, e);
  return h_norm_sin(0.0, t * r, mp.hurst, q) / std::pow(r, e);
}

struct PowerTerm {
  double coef;
  double power;
};

/// Non-oscillating part of N_t for large r.
inline std::vector<PowerTerm> n_t_tail(double t, const ModelParams& mp) {
  const double H = mp.H();
  const double s = 2.0 * H - 1.0;
  const double a = mp.hurst.alpha();
  const double c1 = frac_moment_cos_limit(mp.hurst) * t;
  const double c2 = -std::tgamma(2.0 * H) * std::cos(std::numbers::pi * H) +
                    0.5 * std::tgamma(s) * std::sin(0.5 * std::numbers::pi * s);
  return {{a * c1, -(2.0 * H + 1.0)}, {a * c2, -(2.0 * H + 2.0)}};
}

struct SpectralTail {
  double truncationRadius = 0.0;
  double tailBound = 0.0;
};

struct RadialResult {
  double value = 0.0;
  SpectralTail tail;
};

inline double surface_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw DomainError("spatial dimension must be 1, 2 or 3");
  }
}

inline double angular_factor(int d, double x) {
  switch (d) {
    case 1: return std::cos(x);
    case 2: return bessel_j0(x);
    default: return x == 0.0 ? 1.0 : std::sin(x) / x;
  }
}

/// S_d int_0^inf r^{beta-1} g(r) A_d(r|z|) dr, the radial form of
/// int_{R^d} |xi|^{beta-d} g(|xi|) e^{i xi.z} dxi.
///
/// `frequency` is the oscillation rate of g and sets the panel length.
/// `tail` optionally gives the non-oscillating large-r behaviour of g as a
/// sum of powers; it is integrated analytically past the truncation radius
/// (only used when z = 0).
template <class G>
RadialResult radial_spectral_integral(G&& g, const std::vector<double>& z, const ModelParams& mp,
                                      const QuadratureConfig& q, double frequency = 1.0,
                                      const std::vector<PowerTerm>& tail = {}) {
  if (static_cast<int>(z.size()) != mp.d) throw DomainError("lag vector has wrong dimension");
  const double rho = norm(z);
  const double beta = mp.beta;
  const int d = mp.d;
  const bool use_tail = rho == 0.0 && !tail.empty();
  auto model = [&](double r) {
    double m = 0.0;
    if (use_tail)
      for (const auto& pt : tail) m += pt.coef * std::pow(r, pt.power);
    return m;
  };
  auto body = [&](double r) { return g(r) * angular_factor(d, r * rho); };
  if (use_tail)
    for (const auto& pt : tail)
      if (!(beta + pt.power < 0.0)) throw DivergenceError("tail model is not integrable");

  const double omega = std::max({frequency, rho, 1e-6});
  const double len = std::numbers::pi / omega;
  const quad::Rule& jr = quad::gauss_jacobi_unit(q.jacobiNodes, beta - 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < jr.nodes.size(); ++i) sum += jr.weights[i] * body(len * jr.nodes[i]);
  sum *= std::pow(len, beta);

  const quad::Rule& gl = quad::gauss_legendre(q.panelPerOscillation);
  double r0 = len;
  std::size_t panels = 1;
  double prev_env = -1.0;
  double slope = 0.0;
  int flat = 0;
  RadialResult res;
  for (int octave = 1;; ++octave) {
    const double r1 = 2.0 * r0;
    double env = 0.0;
    for (double lo = r0; lo < r1 * (1.0 - 1e-15); lo += len) {
      const double hi = std::min(r1, lo + len);
      const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
      double p = 0.0;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double r = c + h * gl.nodes[i];
        const double rb = std::pow(r, beta - 1.0);
        const double gv = g(r);
        p += gl.weights[i] * rb * gv * angular_factor(d, r * rho);
        env = std::max(env, r * rb * std::abs(gv - model(r)));
      }
      sum += h * p;
      ++panels;
    }
    r0 = r1;
    if (env == 0.0) {
      res.tail = {r0, 0.0};
      break;
    }
    if (prev_env > 0.0) {
      slope = std::log2(env / prev_env);
      flat = slope > -0.05 ? flat + 1 : 0;
      if (flat >= 3 && octave >= 6)
        throw DivergenceError("radial integrand decays no faster than 1/r (tail exponent " +
                              std::to_string(slope - 1.0) + ")");
      if (slope < -0.05) {
        const double bound = env / (-slope * std::numbers::ln2);
        if (octave >= 3 && bound <= std::max(q.absTol, q.relTol * std::abs(sum))) {
          res.tail = {r0, bound};
          break;
        }
      }
    }
    prev_env = env;
    if (panels > q.maxPanels) {
      if (slope > -0.05) throw DivergenceError("radial integrand tail does not decay");
      throw ConvergenceError("radial_spectral_integral: truncation radius exceeds panel budget");
    }
  }
  if (use_tail) {
    for (const auto& pt : tail) {
      const double e = beta + pt.power;
      sum += -pt.coef * std::pow(res.tail.truncationRadius, e) / e;
    }
  }
  res.value = surface_area(d) * sum;
  return res;
}

/// Variance via the radial route: int mu(dxi) N_t(xi).
inline RadialResult variance_spectral(double t, const ModelParams& mp, const QuadratureConfig& q) {
  auto g = [&](double r) { return n_t(t, r, mp, q); };
  return radial_spectral_integral(g, std::vector<double>(mp.d, 0.0), mp, q, 2.0 * t,
                                  n_t_tail(t, mp));
}

namespace detail {

// One signed rectangle [u0,u1] x [v0,v1] with Phi_d(A-u, B-v, rho).
struct Term {
  double coef;
  double u0, u1, v0, v1;
  double A, B;
  double rho;
};

// int_lo^hi Phi_d(delta, s, rho) ds, with s = a + b and delta = a - b.
class PhiKernel {
 public:
  PhiKernel(const ModelParams& mp, const QuadratureConfig& q) : d_(mp.d), beta_(mp.beta), q_(q) {
    g_ = 2.0 - beta_;
    const double s = beta_ - 2.0;
    kc_ = std::numbers::pi / (2.0 * std::tgamma(1.0 - s) * std::sin(0.5 * std::numbers::pi * s));
    if (d_ == 3) {
      log_mode_ = std::abs(beta_ - 2.0) < 1e-7;
      const double s3 = beta_ - 3.0;
      if (!log_mode_)
        ks_ = std::numbers::pi /
              (2.0 * std::tgamma(1.0 - s3) * std::cos(0.5 * std::numbers::pi * s3));
    }
  }

  // delta_pm[0] = delta + rho, delta_pm[1] = delta - rho, passed separately
  // so callers can form them without cancellation.
  [[nodiscard]] double integrated(double delta, double dp, double dm, double lo, double hi,
                                  double rho) const {
    const double L = hi - lo;
    switch (d_) {
      case 1: return 0.5 * kc_ * bracket(dp, dm, lo, hi, rho, L);
      case 2: return two_d(delta, lo, hi, rho, L);
      default: return three_d(delta, dp, dm, lo, hi, rho, L);
    }
  }

 private:
  [[nodiscard]] double pw(double x) const { return std::pow(std::abs(x), g_); }
  [[nodiscard]] double Gp(double x) const {
    const double v = std::pow(std::abs(x), g_ + 1.0) / (g_ + 1.0);
    return x < 0.0 ? -v : v;
  }

  [[nodiscard]] double bracket(double dp, double dm, double lo, double hi, double rho,
                               double L) const {
    return L * (pw(dp) + pw(dm)) - (Gp(hi + rho) - Gp(lo + rho)) - (Gp(hi - rho) - Gp(lo - rho));
  }

  [[nodiscard]] double origin(double delta, double lo, double hi, double L) const {
    return 2.0 * (L * pw(delta) - (Gp(hi) - Gp(lo)));
  }

  [[nodiscard]] double two_d(double delta, double lo, double hi, double rho, double L) const {
    const double scale = hi + std::abs(delta) + rho;
    if (rho <= 1e-13 * scale) return kc_ * 0.5 * std::numbers::pi * origin(delta, lo, hi, L);
    auto f = [&](quad::PanelPoint th) {
      const double c = rho * std::cos(th.value());
      return bracket(delta + c, delta - c, lo, hi, c, L);
    };
    std::vector<double> br{0.0, 0.5 * std::numbers::pi};
    for (double v : {std::abs(delta), lo, hi})
      if (v > 0.0 && v < rho) br.push_back(std::acos(v / rho));
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    // rounding floor of the bracket is set by Gp(hi + rho)
    const double floor = 1e-14 * std::pow(scale, g_ + 1.0) + 1e-300;
    const auto r = quad::tanh_sinh(f, br, 1e-12, floor, q_.maxPanels, 7);
    return kc_ * r.value;
  }

  [[nodiscard]] double three_d(double delta, double dp, double dm, double lo, double hi,
                               double rho, double L) const {
    const double scale = hi + std::abs(delta) + rho;
    if (log_mode_) {
      auto xlx = [](double x) { return x == 0.0 ? 0.0 : x * std::log(std::abs(x)); };
      auto K = [](double x) {
        return x == 0.0 ? 0.0 : 0.5 * x * x * std::log(std::abs(x)) - 0.25 * x * x;
      };
      if (rho <= 1e-5 * scale) {
        auto xlogx_m = [](double x) { return x == 0.0 ? 0.0 : x * std::log(x) - x; };
        const double ld = delta == 0.0 ? 0.0 : L * std::log(std::abs(delta));
        return 2.0 * std::numbers::pi * ((xlogx_m(hi) - xlogx_m(lo)) - ld);
      }
      const double bulk = L * (xlx(dp) + xlx(-dm));
      const double sp = (K(rho + hi) - K(rho + lo)) - (K(rho - hi) - K(rho - lo));
      return -(std::numbers::pi / rho) * (bulk - sp);
    }
    if (rho <= 1e-5 * scale) return 2.0 * std::numbers::pi * kc_ * 0.5 * origin(delta, lo, hi, L);
    auto F = [&](double p) {
      const double v = std::pow(std::abs(p), 3.0 - beta_);
      return p < 0.0 ? -v : v;
    };
    auto E = [&](double x) { return std::pow(std::abs(x), 4.0 - beta_) / (4.0 - beta_); };
    // rho - delta = -(delta - rho)
    const double bulk = L * (F(dp) - F(dm));
    const double sp = -(E(rho + hi) - E(rho + lo)) + (E(rho - hi) - E(rho - lo));
    return (std::numbers::pi * ks_ / rho) * (bulk + sp);
  }

  int d_;
  double beta_;
  QuadratureConfig q_;
  double g_ = 0.0;
  double kc_ = 0.0;
  double ks_ = 0.0;
  bool log_mode_ = false;
};

inline double integrate_terms(const std::vector<Term>& terms, const ModelParams& mp,
                              const QuadratureConfig& q) {
  if (terms.empty()) return 0.0;
  const PhiKernel phi(mp, q);
  const double lam = 2.0 * mp.H() - 2.0;

  struct Prepared {
    Term t;
    double dAB, cp, cm;     // A-B, A-B+rho, A-B-rho
    double lo1, lo2;        // sigma'_lo = max(w - lo1, lo2 - w)
    double hi1, hi2;        // sigma'_hi = min(w - hi1, hi2 - w)
    double wmin, wmax;
  };
  std::vector<Prepared> prep;
  double wmin = HUGE_VAL, wmax = -HUGE_VAL;
  std::vector<double> br;
  for (const Term& t : terms) {
    if (t.coef == 0.0 || t.u1 <= t.u0 || t.v1 <= t.v0) continue;
    if (t.A < t.u1 || t.B < t.v1) throw DomainError("integrate_terms: time beyond observation");
    Prepared p{};
    p.t = t;
    p.dAB = t.A - t.B;
    p.cp = p.dAB + t.rho;
    p.cm = p.dAB - t.rho;
    const double S = t.A + t.B;
    p.lo1 = 2.0 * t.u1 - S;
    p.lo2 = S - 2.0 * t.v1;
    p.hi1 = 2.0 * t.u0 - S;
    p.hi2 = S - 2.0 * t.v0;
    p.wmin = t.u0 - t.v1;
    p.wmax = t.u1 - t.v0;
    wmin = std::min(wmin, p.wmin);
    wmax = std::max(wmax, p.wmax);
    for (double v : {p.wmin, p.wmax, t.u0 - t.v0, t.u1 - t.v1, p.dAB, p.cp, p.cm})
      br.push_back(v);
    for (double c : {0.0, t.rho}) {
      br.push_back(c + p.lo1);
      br.push_back(p.lo2 - c);
      br.push_back(c + p.hi1);
      br.push_back(p.hi2 - c);
    }
    prep.push_back(p);
  }
  if (prep.empty()) return 0.0;
  br.push_back(0.0);
  br.erase(std::remove_if(br.begin(), br.end(), [&](double v) { return v < wmin || v > wmax; }),
           br.end());
  br.push_back(wmin);
  br.push_back(wmax);
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());

  auto f = [&](quad::PanelPoint pt) {
    const double w = pt.value();
    const double aw = std::abs(w);
    if (aw == 0.0) return 0.0;
    double s = 0.0;
    for (const Prepared& p : prep) {
      if (w <= p.wmin || w >= p.wmax) continue;
      const double lo = std::max(-pt.from(p.lo1), pt.from(p.lo2));
      const double hi = std::min(-pt.from(p.hi1), pt.from(p.hi2));
      if (!(hi > lo)) continue;
      const double delta = pt.from(p.dAB);
      s += p.t.coef * phi.integrated(delta, pt.from(p.cp), pt.from(p.cm), lo, hi, p.t.rho);
    }
    return 0.5 * std::pow(aw, lam) * s;
  };
  const auto r = quad::tanh_sinh(f, br, q.relTol, q.absTol, q.maxPanels);
  return mp.hurst.alpha() * r.value;
}

}  // namespace detail

/// E[u_i(t,x) u_i(s,y)] for one component.
inline double covariance(const SpaceTimePoint& p, const SpaceTimePoint& p2, const ModelParams& mp,
                         const QuadratureConfig& q) {
  if (p.t < 0.0 || p2.t < 0.0) throw DomainError("covariance: negative time");
  if (p.t == 0.0 || p2.t == 0.0) return 0.0;
  const double rho = distance(p.x, p2.x);
  return detail::integrate_terms({{1.0, 0.0, p.t, 0.0, p2.t, p.t, p2.t, rho}}, mp, q);
}

inline double variance(const SpaceTimePoint& p, const ModelParams& mp, const QuadratureConfig& q) {
  if (p.t < 0.0) throw DomainError("variance: negative time");
  if (p.t == 0.0) return 0.0;
  return detail::integrate_terms({{1.0, 0.0, p.t, 0.0, p.t, p.t, p.t, 0.0}}, mp, q);
}

/// E|u(t,x+z) - u(t,x)|^2.
inline double space_increment_variance(double t, const std::vector<double>& z,
                                       const ModelParams& mp, const QuadratureConfig& q) {
  if (static_cast<int>(z.size()) != mp.d) throw DomainError("lag vector has wrong dimension");
  if (t < 0.0) throw DomainError("space_increment_variance: negative time");
  const double rho = norm(z);
  if (t == 0.0 || rho == 0.0) return 0.0;
  return detail::integrate_terms(
      {{2.0, 0.0, t, 0.0, t, t, t, 0.0}, {-2.0, 0.0, t, 0.0, t, t, t, rho}}, mp, q);
}

struct TimeIncrementParts {
  double E1;
  double E2;
  double E3;
};

namespace detail {

inline std::vector<Term> e1_terms(double t, double h, double c = 1.0) {
  const double th = t + h;
  return {{c, 0, t, 0, t, th, th, 0.0},
          {-c, 0, t, 0, t, th, t, 0.0},
          {-c, 0, t, 0, t, t, th, 0.0},
          {c, 0, t, 0, t, t, t, 0.0}};
}

inline std::vector<Term> e2_terms(double t, double h, double c = 1.0) {
  return {{c, t, t + h, t, t + h, t + h, t + h, 0.0}};
}

inline std::vector<Term> e3_terms(double t, double h, double c = 1.0) {
  const double th = t + h;
  return {{c, 0, t, t, th, th, th, 0.0}, {-c, 0, t, t, th, t, th, 0.0}};
}

inline void check_time_step(double t, double h) {
  if (t < 0.0) throw DomainError("negative time");
  if (!(h > 0.0)) throw DomainError("time step must be positive");
}

}  // namespace detail

/// E1 = |(g_{t+h} - g_t) 1_[0,t]|^2, E2 = |g_{t+h} 1_[t,t+h]|^2, E3 their
/// inner product.  E1 + E2 + 2 E3 = E|u(t+h,x) - u(t,x)|^2.
inline TimeIncrementParts time_increment_decomposition(double t, double h, const ModelParams& mp,
                                                       const QuadratureConfig& q) {
  detail::check_time_step(t, h);
  TimeIncrementParts parts{};
  parts.E1 = t > 0.0 ? detail::integrate_terms(detail::e1_terms(t, h), mp, q) : 0.0;
  parts.E2 = detail::integrate_terms(detail::e2_terms(t, h), mp, q);
  parts.E3 = t > 0.0 ? detail::integrate_terms(detail::e3_terms(t, h), mp, q) : 0.0;
  return parts;
}

/// E|u(t+h,x) - u(t,x)|^2 as a single integral of E1 + E2 + 2 E3.
inline double time_increment_variance(double t, double h, const ModelParams& mp,
                                      const QuadratureConfig& q) {
  detail::check_time_step(t, h);
  std::vector<detail::Term> terms = detail::e2_terms(t, h);
  if (t > 0.0) {
    for (const auto& x : detail::e1_terms(t, h)) terms.push_back(x);
    for (const auto& x : detail::e3_terms(t, h, 2.0)) terms.push_back(x);
  }
  return detail::integrate_terms(terms, mp, q);
}

/// E|u(p) - u(p2)|^2 = var(p) + var(p2) - 2 cov(p, p2).
inline double increment_variance(const SpaceTimePoint& p, const SpaceTimePoint& p2,
                                 const ModelParams& mp, const QuadratureConfig& q) {
  const double rho = distance(p.x, p2.x);
  if (p.t == p2.t) {
    std::vector<double> z(p.x.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = p.x[i] - p2.x[i];
    return space_increment_variance(p.t, z, mp, q);
  }
  if (rho == 0.0) {
    const double lo = std::min(p.t, p2.t);
    return time_increment_variance(lo, std::abs(p.t - p2.t), mp, q);
  }
  std::vector<detail::Term> terms;
  if (p.t > 0.0) terms.push_back({1.0, 0, p.t, 0, p.t, p.t, p.t, 0.0});
  if (p2.t > 0.0) terms.push_back({1.0, 0, p2.t, 0, p2.t, p2.t, p2.t, 0.0});
  if (p.t > 0.0 && p2.t > 0.0) terms.push_back({-2.0, 0, p.t, 0, p2.t, p.t, p2.t, rho});
  return detail::integrate_terms(terms, mp, q);
}

/// |t-s|^gamma + |x-y|^gamma with gamma = 2H + 1 - beta.
inline double joint_metric(const SpaceTimePoint& p, const SpaceTimePoint& p2,
                           const ModelParams& mp) {
  const double g = mp.gamma();
  return std::pow(std::abs(p.t - p2.t), g) + std::pow(distance(p.x, p2.x), g);
}

}  // namespace fracwave
