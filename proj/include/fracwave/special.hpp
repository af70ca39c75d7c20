#pragma once

#include <cmath>
#include <numbers>

namespace fracwave {

// Bessel J0: power series up to x = 12, Hankel expansion beyond.
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x <= 12.0) {
    const double y = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 100; ++k) {
      term *= -y / (static_cast<double>(k) * k);
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum) + 1e-300) break;
    }
    return sum;
  }
  // a_k = prod_{j<=k} (2j-1)^2 / (k! 8^k)
  double p = 0.0, q = 0.0;
  double a = 1.0;
  double last = HUGE_VAL;
  for (int kk = 0; kk < 60; ++kk) {
    const double term = a / std::pow(x, kk);
    if (term > last) break;
    last = term;
    const int r = kk % 4;
    if (r == 0) p += term;
    else if (r == 1) q -= term;
    else if (r == 2) p -= term;
    else q += term;
    const double m = 2.0 * kk + 1.0;
    a *= m * m / (8.0 * (kk + 1));
  }
  const double chi = x - 0.25 * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace fracwave
