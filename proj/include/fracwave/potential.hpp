#pragma once

// Riesz kernels, energies of discrete measures, capacity by Frank-Wolfe on
// the simplex, and covering upper bounds for Hausdorff measures.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/model.hpp"
#include "fracwave/parallel.hpp"
#include "fracwave/philox.hpp"

namespace fracwave {

struct RieszIndex {
  double betaCap = 0.0;
  double n0 = 1.0;
};

inline double riesz_kernel(double r, const RieszIndex& idx) {
  if (!(r > 0.0)) throw DomainError("riesz_kernel: need r > 0");
  if (idx.betaCap > 0.0) return std::pow(r, -idx.betaCap);
  if (idx.betaCap == 0.0) {
    if (r > idx.n0) throw DomainError("riesz_kernel: r exceeds N0 for the log kernel");
    return std::log(idx.n0 / r);
  }
  return 1.0;
}

struct Box {
  std::vector<double> min;
  std::vector<double> max;
};

// Axis-aligned cells: centres and side lengths (a side may be 0).
struct CellSet {
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> sides;

  [[nodiscard]] std::size_t size() const { return centers.size(); }
  [[nodiscard]] bool empty() const { return centers.empty(); }
  [[nodiscard]] std::size_t dim() const { return centers.empty() ? 0 : centers[0].size(); }

  [[nodiscard]] double diameter() const {
    if (centers.empty()) return 0.0;
    const std::size_t k = dim();
    std::vector<double> lo(k, HUGE_VAL), hi(k, -HUGE_VAL);
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t c = 0; c < k; ++c) {
        lo[c] = std::min(lo[c], centers[i][c] - 0.5 * sides[i][c]);
        hi[c] = std::max(hi[c], centers[i][c] + 0.5 * sides[i][c]);
      }
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += (hi[c] - lo[c]) * (hi[c] - lo[c]);
    return std::sqrt(s);
  }
};

/// Cells of a global grid of side `mesh` (anchored at the origin) clipped to
/// the union of the boxes. Degenerate boxes give degenerate cells.
inline CellSet discretize_boxes(const std::vector<Box>& boxes, double mesh) {
  if (!(mesh > 0.0)) throw DomainError("mesh must be positive");
  CellSet out;
  if (boxes.empty()) return out;
  const std::size_t k = boxes[0].min.size();
  std::map<std::vector<long long>, std::pair<std::vector<double>, std::vector<double>>> cells;
  for (const Box& b : boxes) {
    if (b.min.size() != k || b.max.size() != k) throw DomainError("box dimension mismatch");
    std::vector<long long> first(k), last(k);
    for (std::size_t c = 0; c < k; ++c) {
      if (b.max[c] < b.min[c]) throw DomainError("box max below min");
      first[c] = static_cast<long long>(std::floor(b.min[c] / mesh));
      last[c] = std::max(first[c], static_cast<long long>(std::ceil(b.max[c] / mesh - 1e-9)) - 1);
    }
    std::vector<long long> idx = first;
    for (;;) {
      std::vector<double> lo(k), hi(k);
      bool ok = true;
      for (std::size_t c = 0; c < k; ++c) {
        lo[c] = std::max(b.min[c], idx[c] * mesh);
        hi[c] = std::min(b.max[c], (idx[c] + 1) * mesh);
        if (hi[c] < lo[c]) ok = false;
      }
      if (ok) {
        auto it = cells.find(idx);
        if (it == cells.end()) {
          cells.emplace(idx, std::make_pair(lo, hi));
        } else {
          for (std::size_t c = 0; c < k; ++c) {
            it->second.first[c] = std::min(it->second.first[c], lo[c]);
            it->second.second[c] = std::max(it->second.second[c], hi[c]);
          }
        }
      }
      std::size_t c = 0;
      for (; c < k; ++c) {
        if (++idx[c] <= last[c]) break;
        idx[c] = first[c];
      }
      if (c == k) break;
    }
  }
  for (const auto& [key, span] : cells) {
    std::vector<double> ctr(k), side(k);
    for (std::size_t c = 0; c < k; ++c) {
      ctr[c] = 0.5 * (span.first[c] + span.second[c]);
      side[c] = span.second[c] - span.first[c];
    }
    out.centers.push_back(ctr);
    out.sides.push_back(side);
  }
  return out;
}

struct DiscreteMeasure {
  std::vector<std::vector<double>> atoms;
  std::vector<double> weights;
  std::vector<std::vector<double>> cellSides;

  [[nodiscard]] double cellDiameter() const {
    double m = 0.0;
    for (const auto& s : cellSides) m = std::max(m, norm(s));
    return m;
  }

  void validate() const {
    if (atoms.empty()) throw DomainError("measure has no atoms");
    if (weights.size() != atoms.size() || cellSides.size() != atoms.size())
      throw DomainError("measure arrays differ in length");
    double s = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw DomainError("negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DomainError("weights must sum to 1");
  }

  static DiscreteMeasure uniform(const CellSet& cells) {
    DiscreteMeasure m;
    m.atoms = cells.centers;
    m.cellSides = cells.sides;
    m.weights.assign(cells.size(), 1.0 / static_cast<double>(cells.size()));
    return m;
  }
};

namespace detail {

// E K(|X - Y|) for X, Y independent uniform in a box with the given sides.
inline double self_energy_mc(const std::vector<double>& sides, const RieszIndex& idx) {
  constexpr std::uint32_t kSamples = 100000;
  const auto k = static_cast<std::uint32_t>(sides.size());
  double acc = 0.0;
  for (std::uint32_t i = 0; i < kSamples; ++i) {
    double r2 = 0.0;
    for (std::uint32_t c = 0; c < k; ++c) {
      const auto w = philox4x32({i, c, 0x5e1fu, 0u}, {0x2545F491u, 0x9E3779B9u});
      const double du = u01_open(w[0], w[1]) - u01_open(w[2], w[3]);
      r2 += du * du * sides[c] * sides[c];
    }
    acc += riesz_kernel(std::sqrt(r2), idx);
  }
  return acc / kSamples;
}

// Closed form on a segment of length s: E|X-Y|^{-b} = 2 s^{-b} / ((1-b)(2-b)),
// E log(N0/|X-Y|) = log(N0/s) + 3/2.
inline double self_energy_segment(double s, const RieszIndex& idx) {
  const double b = idx.betaCap;
  if (b < 0.0) return 1.0;
  if (b == 0.0) return std::log(idx.n0 / s) + 1.5;
  if (b >= 1.0) return HUGE_VAL;
  return 2.0 * std::pow(s, -b) / ((1.0 - b) * (2.0 - b));
}

inline double self_energy(const std::vector<double>& sides, const RieszIndex& idx) {
  if (idx.betaCap < 0.0) return 1.0;
  std::vector<double> nz;
  for (double s : sides)
    if (s > 0.0) nz.push_back(s);
  if (nz.empty()) return HUGE_VAL;
  if (nz.size() == 1) return self_energy_segment(nz[0], idx);
  if (idx.betaCap >= static_cast<double>(nz.size())) return HUGE_VAL;
  using Key = std::tuple<std::vector<double>, double, double>;
  static std::map<Key, double> cache;
  static std::mutex mu;
  std::sort(nz.begin(), nz.end());
  const Key key{nz, idx.betaCap, idx.betaCap == 0.0 ? idx.n0 : 0.0};
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double v = self_energy_mc(nz, idx);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, v);
  return v;
}

inline Eigen::MatrixXd energy_matrix(const std::vector<std::vector<double>>& atoms,
                                     const std::vector<std::vector<double>>& sides,
                                     const RieszIndex& idx, unsigned threads = 0) {
  const auto n = static_cast<Eigen::Index>(atoms.size());
  Eigen::MatrixXd K(n, n);
  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == ii) {
            K(ii, ii) = self_energy(sides[i], idx);
            continue;
          }
          const double r = distance(atoms[i], atoms[static_cast<std::size_t>(j)]);
          if (r == 0.0)
            throw OverlapError("atoms " + std::to_string(i) + " and " + std::to_string(j) +
                               " coincide");
          K(ii, j) = riesz_kernel(r, idx);
        }
      },
      threads);
  return K;
}

}  // namespace detail

/// sum_ij w_i w_j K(i,j) with cell-averaged self-interaction on the diagonal.
inline double energy(const DiscreteMeasure& m, const RieszIndex& idx) {
  m.validate();
  if (idx.betaCap < 0.0) {
    double s = 0.0;
    for (double w : m.weights) s += w;
    return s * s;
  }
  const Eigen::MatrixXd K = detail::energy_matrix(m.atoms, m.cellSides, idx);
  const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), static_cast<Eigen::Index>(m.weights.size()));
  double e = 0.0;
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    if (w[i] == 0.0) continue;
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      if (w[j] != 0.0) e += w[i] * w[j] * K(i, j);
  }
  return e;
}

struct CapacityResult {
  double capacity = 0.0;
  double minEnergy = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  std::vector<double> weights;
};

struct CapacityOptions {
  double solverTol = 1e-8;
  std::size_t maxIterations = 100000;
  double blowUp = 1e12;
  unsigned threads = 0;
};

inline double default_n0(const CellSet& cells) {
  const double diam = cells.diameter();
  return diam > 0.0 ? 2.0 * diam : 1.0;
}

/// 1 / min energy over probability weights on the cells; 0 past blow-up.
inline CapacityResult capacity(const CellSet& cells, const RieszIndex& idx,
                               const CapacityOptions& opt = {}) {
  if (cells.empty()) throw DomainError("capacity: empty cell set");
  CapacityResult res;
  const auto n = static_cast<Eigen::Index>(cells.size());
  if (idx.betaCap < 0.0) {
    res.capacity = 1.0;
    res.minEnergy = 1.0;
    res.weights.assign(cells.size(), 1.0 / static_cast<double>(n));
    return res;
  }
  const Eigen::MatrixXd K = detail::energy_matrix(cells.centers, cells.sides, idx, opt.threads);
  const Eigen::VectorXd diag = K.diagonal();
  if (n == 1 || !diag.allFinite()) {
    // an infinite self-energy pins that atom's weight to 0
    std::vector<Eigen::Index> fin;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::isfinite(diag[i])) fin.push_back(i);
    if (fin.empty()) {
      res.capacity = 0.0;
      res.minEnergy = HUGE_VAL;
      res.weights.assign(cells.size(), 0.0);
      return res;
    }
    if (static_cast<Eigen::Index>(fin.size()) < n) {
      CellSet sub;
      for (auto i : fin) {
        sub.centers.push_back(cells.centers[static_cast<std::size_t>(i)]);
        sub.sides.push_back(cells.sides[static_cast<std::size_t>(i)]);
      }
      CapacityResult r = capacity(sub, idx, opt);
      res = r;
      res.weights.assign(cells.size(), 0.0);
      for (std::size_t a = 0; a < fin.size(); ++a) res.weights[static_cast<std::size_t>(fin[a])] = r.weights[a];
      return res;
    }
  }

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd Kw = K * w;
  double f = w.dot(Kw);

  // exact minimizer on the current support, if it is interior
  auto polish = [&] {
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < n; ++i)
      if (w[i] > 0.0) S.push_back(i);
    const auto m = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd KS(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) KS(a, b) = K(S[a], S[b]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(KS);
    if (ldlt.info() != Eigen::Success) return;
    const Eigen::VectorXd x = ldlt.solve(Eigen::VectorXd::Ones(m));
    const double sx = x.sum();
    if (!(sx > 0.0) || (x.array() <= 0.0).any() || !x.allFinite()) return;
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) cand[S[a]] = x[a] / sx;
    const Eigen::VectorXd Kc = K * cand;
    const double fc = cand.dot(Kc);
    if (fc <= f) {
      w = cand;
      Kw = Kc;
      f = fc;
    }
  };

  double gap = HUGE_VAL;
  std::size_t it = 0;
  for (; it < opt.maxIterations; ++it) {
    Eigen::Index s = 0;
    Kw.minCoeff(&s);
    gap = 2.0 * (f - Kw[s]);
    if (gap <= opt.solverTol * f) break;
    if (it % 100 == 0) {
      polish();
      Kw.minCoeff(&s);
      gap = 2.0 * (f - Kw[s]);
      if (gap <= opt.solverTol * f) break;
    }
    Eigen::Index a = -1;
    double worst = -HUGE_VAL;
    for (Eigen::Index i = 0; i < n; ++i)
      if (w[i] > 0.0 && Kw[i] > worst) {
        worst = Kw[i];
        a = i;
      }
    const double fw_gap = f - Kw[s];
    const double away_gap = a >= 0 ? Kw[a] - f : -1.0;
    if (fw_gap >= away_gap) {
      const double num = f - Kw[s];
      const double den = K(s, s) - 2.0 * Kw[s] + f;
      const double step = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 1.0;
      w *= (1.0 - step);
      w[s] += step;
      Kw = (1.0 - step) * Kw + step * K.col(s);
    } else {
      const double wa = w[a];
      const double gmax = wa < 1.0 ? wa / (1.0 - wa) : HUGE_VAL;
      const double num = Kw[a] - f;
      const double den = f - 2.0 * Kw[a] + K(a, a);
      double step = den > 0.0 ? num / den : gmax;
      step = std::clamp(step, 0.0, gmax);
      w *= (1.0 + step);
      w[a] -= step;
      if (step == gmax) w[a] = 0.0;
      Kw = (1.0 + step) * Kw - step * K.col(a);
    }
    f = w.dot(Kw);
  }
  if (it >= opt.maxIterations)
    throw ConvergenceError("capacity: Frank-Wolfe stopped after " + std::to_string(it) +
                           " iterations with duality gap " + std::to_string(gap));
  res.minEnergy = f;
  res.gap = gap;
  res.iterations = it;
  res.capacity = f > opt.blowUp ? 0.0 : 1.0 / f;
  res.weights.assign(w.data(), w.data() + n);
  return res;
}

struct CoveringEstimate {
  double order = 0.0;
  double radiiSum = 0.0;
  std::size_t ballCount = 0;
  double meshEpsilon = 0.0;
};

/// Upper bound on H_order: at each radius eps, count grid cubes of side
/// 2 eps / sqrt(k) (each inside a ball of radius eps) that meet the set.
inline CoveringEstimate hausdorff_upper(const CellSet& cells, double order,
                                        const std::vector<double>& meshLevels) {
  CoveringEstimate best;
  best.order = order;
  if (order < 0.0) {
    best.radiiSum = HUGE_VAL;
    return best;
  }
  if (meshLevels.empty()) throw DomainError("hausdorff_upper: no mesh levels");
  for (std::size_t i = 1; i < meshLevels.size(); ++i)
    if (!(meshLevels[i] < meshLevels[i - 1])) throw DomainError("mesh levels must decrease");
  if (cells.empty()) return best;
  const std::size_t k = cells.dim();
  best.radiiSum = HUGE_VAL;
  for (double eps : meshLevels) {
    if (!(eps > 0.0)) throw DomainError("mesh level must be positive");
    const double side = 2.0 * eps / std::sqrt(static_cast<double>(k));
    std::set<std::vector<long long>> occupied;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::vector<long long> first(k), last(k);
      for (std::size_t c = 0; c < k; ++c) {
        const double lo = cells.centers[i][c] - 0.5 * cells.sides[i][c];
        const double hi = cells.centers[i][c] + 0.5 * cells.sides[i][c];
        first[c] = static_cast<long long>(std::floor(lo / side + 1e-9));
        last[c] = std::max(first[c], static_cast<long long>(std::ceil(hi / side - 1e-9)) - 1);
      }
      std::vector<long long> idx = first;
      for (;;) {
        occupied.insert(idx);
        std::size_t c = 0;
        for (; c < k; ++c) {
          if (++idx[c] <= last[c]) break;
          idx[c] = first[c];
        }
        if (c == k) break;
      }
    }
    const double sum = static_cast<double>(occupied.size()) * std::pow(2.0 * eps, order);
    if (sum < best.radiiSum) {
      best.radiiSum = sum;
      best.ballCount = occupied.size();
      best.meshEpsilon = eps;
    }
  }
  return best;
}

enum class HittingVariant { SpaceTime, FixedTime, FixedSpace };

/// Order of the capacity / Hausdorff bounds for each variant.
inline double hitting_order(const ModelParams& mp, HittingVariant v) {
  const double g = mp.gamma();
  switch (v) {
    case HittingVariant::FixedTime: return mp.k - 2.0 * mp.d / g;
    case HittingVariant::FixedSpace: return mp.k - 2.0 / g;
    default: return mp.k - 2.0 * (mp.d + 1) / g;
  }
}

struct HittingBounds {
  double capLower = 0.0;
  double hausUpper = 0.0;
  double order = 0.0;
  double gap = 0.0;
};

inline std::vector<double> default_mesh_levels(double mesh) {
  std::vector<double> levels;
  for (int i = 0; i < 6; ++i) levels.push_back(mesh * std::ldexp(1.0, 2 - i));
  return levels;
}

inline HittingBounds hitting_bounds(const CellSet& A, const ModelParams& mp, double mesh,
                                    HittingVariant v = HittingVariant::SpaceTime,
                                    const CapacityOptions& opt = {}) {
  if (!mp.sharpRegime()) throw DomainError("hitting_bounds needs beta > 2H - 1");
  HittingBounds hb;
  hb.order = hitting_order(mp, v);
  if (A.empty()) return hb;
  if (static_cast<int>(A.dim()) != mp.k) throw DomainError("target set must live in R^k");
  const auto cap = capacity(A, {hb.order, default_n0(A)}, opt);
  hb.capLower = cap.capacity;
  hb.gap = cap.gap;
  hb.hausUpper = hausdorff_upper(A, hb.order, default_mesh_levels(mesh)).radiiSum;
  return hb;
}

}  // namespace fracwave
