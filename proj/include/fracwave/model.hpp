#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/kernels.hpp"

namespace fracwave {

// Wave equation driven by fractional-in-time, Riesz-in-space noise.
struct ModelParams {
  HurstParams hurst;
  double beta = 1.0;
  int d = 1;
  int k = 1;
  double t0 = 0.5;
  double T = 1.0;
  double M = 1.0;

  [[nodiscard]] double H() const { return hurst.H; }
  [[nodiscard]] double gamma() const { return 2.0 * hurst.H + 1.0 - beta; }
  [[nodiscard]] bool sharpRegime() const { return beta > 2.0 * hurst.H - 1.0; }

  // Q = 2(d+1)/gamma, the index of the space-time parameter set.
  [[nodiscard]] double Q() const { return 2.0 * (d + 1) / gamma(); }

  void validate() const {
    hurst.validate();
    if (d < 1 || d > 3) throw DomainError("spatial dimension must be 1, 2 or 3");
    if (k < 1) throw DomainError("number of components must be positive");
    // beta = d = 1 is spatial white noise; the closed forms stay finite there
    const bool white = d == 1 && beta == 1.0;
    const double cap = std::min(static_cast<double>(d), 2.0 * hurst.H + 1.0);
    if (!(beta > 0.0 && (beta < cap || (white && beta < 2.0 * hurst.H + 1.0))))
      throw DomainError("existence condition violated: need 0 < beta < min(d, 2H+1), got beta=" +
                        std::to_string(beta) + " with H=" + std::to_string(hurst.H) +
                        ", d=" + std::to_string(d));
    if (!(t0 > 0.0 && T > t0)) throw DomainError("need 0 < t0 < T");
    if (!(M > 0.0)) throw DomainError("spatial half-width M must be positive");
  }

  static ModelParams make(double H, double beta, int d, int k = 1, double t0 = 0.5,
                          double T = 1.0, double M = 1.0) {
    ModelParams mp;
    mp.hurst.H = H;
    mp.beta = beta;
    mp.d = d;
    mp.k = k;
    mp.t0 = t0;
    mp.T = T;
    mp.M = M;
    mp.validate();
    return mp;
  }

  // No validation; only for probing the divergence checks.
  static ModelParams unchecked(double H, double beta, int d) {
    ModelParams mp;
    mp.hurst.H = H;
    mp.beta = beta;
    mp.d = d;
    return mp;
  }
};

struct SpaceTimePoint {
  double t = 0.0;
  std::vector<double> x;
};

inline double distance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("spatial dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

inline double norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace fracwave
