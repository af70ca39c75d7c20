#pragma once

// Exact Gaussian sampling of the k-component field on a space-time grid.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/model.hpp"
#include "fracwave/parallel.hpp"
#include "fracwave/philox.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

struct GridSpec {
  std::vector<double> times;
  std::vector<std::vector<double>> sites;
  std::size_t maxNodes = 4096;

  [[nodiscard]] std::size_t size() const { return times.size() * sites.size(); }

  void validate(int d) const {
    if (times.empty() || sites.empty()) throw DomainError("grid has no nodes");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw DomainError("grid times must be strictly increasing");
    for (double t : times)
      if (t < 0.0) throw DomainError("grid time is negative");
    std::set<std::vector<double>> seen;
    for (const auto& s : sites) {
      if (static_cast<int>(s.size()) != d) throw DomainError("grid site has wrong dimension");
      if (!seen.insert(s).second) throw DomainError("duplicate grid site");
    }
    if (size() > maxNodes)
      throw DomainError("grid has " + std::to_string(size()) + " nodes, limit is " +
                        std::to_string(maxNodes));
  }

  // node index = time index * |sites| + site index
  [[nodiscard]] std::vector<SpaceTimePoint> nodes() const {
    std::vector<SpaceTimePoint> out;
    out.reserve(size());
    for (double t : times)
      for (const auto& s : sites) out.push_back({t, s});
    return out;
  }

  [[nodiscard]] double mesh() const {
    double m = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) m = std::max(m, times[i] - times[i - 1]);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      double nearest = HUGE_VAL;
      for (std::size_t j = 0; j < sites.size(); ++j)
        if (i != j) nearest = std::min(nearest, distance(sites[i], sites[j]));
      if (nearest < HUGE_VAL) m = std::max(m, nearest);
    }
    return m;
  }
};

struct GramMatrix {
  Eigen::MatrixXd entries;
  std::vector<SpaceTimePoint> nodes;
  GridSpec grid;  // empty when built from a bare node list
};

inline GramMatrix assemble_gram(const std::vector<SpaceTimePoint>& nodes, const ModelParams& mp,
                                const QuadratureConfig& q = {}, unsigned threads = 0) {
  const std::size_t n = nodes.size();
  GramMatrix g;
  g.nodes = nodes;
  g.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        try {
          vals[p] = covariance(nodes[i], nodes[j], mp, q);
        } catch (const ConvergenceError& e) {
          throw ConvergenceError("gram entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                 "): " + e.what());
        }
      },
      threads);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(pairs[p].first);
    const auto j = static_cast<Eigen::Index>(pairs[p].second);
    g.entries(i, j) = vals[p];
    g.entries(j, i) = vals[p];
  }
  return g;
}

inline GramMatrix assemble_gram(const GridSpec& grid, const ModelParams& mp,
                                const QuadratureConfig& q = {}, unsigned threads = 0) {
  grid.validate(mp.d);
  GramMatrix g = assemble_gram(grid.nodes(), mp, q, threads);
  g.grid = grid;
  return g;
}

struct FieldSample {
  GridSpec grid;
  std::vector<SpaceTimePoint> nodes;
  int k = 1;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  double jitterApplied = 0.0;
  std::vector<double> values;  // [replicate][component][node]

  [[nodiscard]] std::size_t nodeCount() const { return nodes.size(); }
  [[nodiscard]] double at(std::size_t rep, int comp, std::size_t node) const {
    return values[(rep * static_cast<std::size_t>(k) + static_cast<std::size_t>(comp)) * nodeCount() +
                  node];
  }
};

/// Lower factor of the Gram matrix on its rows of positive variance, with
/// jitter escalation. Rows of zero variance stay identically zero.
struct GramFactor {
  Eigen::MatrixXd L;
  std::vector<Eigen::Index> active;
  double jitter = 0.0;
};

inline GramFactor factor_gram(const GramMatrix& gram) {
  const Eigen::Index n = gram.entries.rows();
  GramFactor f;
  for (Eigen::Index i = 0; i < n; ++i)
    if (gram.entries(i, i) > 0.0) f.active.push_back(i);
  const auto m = static_cast<Eigen::Index>(f.active.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = gram.entries(f.active[a], f.active[b]);
  if (m == 0) return f;
  const double mean_diag = sub.diagonal().mean();
  const double levels[] = {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double lv : levels) {
    Eigen::MatrixXd trial = sub;
    trial.diagonal().array() += lv * mean_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      f.L = llt.matrixL();
      f.jitter = lv * mean_diag;
      return f;
    }
  }
  throw FactorizationError("Gram matrix not factorizable at jitter 1e-6 x mean diagonal",
                           1e-6 * mean_diag);
}

/// Independent N(0, gram) vectors for every (replicate, component). The
/// normal for node i is keyed by (seed; i, component, replicate), so values
/// do not depend on scheduling.
inline FieldSample sample_field(const GramMatrix& gram, int k, std::size_t replicates,
                                std::uint64_t seed, unsigned threads = 0) {
  if (k < 1) throw DomainError("k must be positive");
  const std::size_t n = static_cast<std::size_t>(gram.entries.rows());
  if (gram.nodes.size() != n) throw DomainError("Gram matrix nodes do not match its size");
  const GramFactor f = factor_gram(gram);
  FieldSample out;
  out.grid = gram.grid;
  out.nodes = gram.nodes;
  out.k = k;
  out.replicates = replicates;
  out.seed = seed;
  out.jitterApplied = f.jitter;
  out.values.assign(replicates * static_cast<std::size_t>(k) * n, 0.0);
  const auto m = static_cast<Eigen::Index>(f.active.size());
  parallel_for(
      replicates * static_cast<std::size_t>(k),
      [&](std::size_t job) {
        const std::size_t rep = job / static_cast<std::size_t>(k);
        const auto comp = static_cast<std::uint32_t>(job % static_cast<std::size_t>(k));
        Eigen::VectorXd z(m);
        for (Eigen::Index a = 0; a < m; ++a)
          z[a] = philox_normal(seed, static_cast<std::uint32_t>(f.active[a]), comp,
                               static_cast<std::uint32_t>(rep),
                               static_cast<std::uint32_t>(static_cast<std::uint64_t>(rep) >> 32));
        const Eigen::VectorXd x = f.L.triangularView<Eigen::Lower>() * z;
        double* dst = out.values.data() + job * n;
        for (Eigen::Index a = 0; a < m; ++a) dst[f.active[a]] = x[a];
      },
      threads);
  return out;
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    std::memcpy(&bits, &v, sizeof(double));
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("truncated binary sample");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>) {
    double v;
    std::memcpy(&v, &bits, sizeof(double));
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace detail

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

// Layout, all little-endian:
//   "FWS1" | u32 d | u64 nodes | u32 k | u64 replicates | u64 seed
//   | f64 (t, x1..xd) per node | f64 values[replicate][component][node]
inline void write_binary(const FieldSample& s, std::ostream& os) {
  os.write("FWS1", 4);
  const std::uint32_t d = s.nodes.empty() ? 0u : static_cast<std::uint32_t>(s.nodes[0].x.size());
  detail::put_le<std::uint32_t>(os, d);
  detail::put_le<std::uint64_t>(os, s.nodes.size());
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.k));
  detail::put_le<std::uint64_t>(os, s.replicates);
  detail::put_le<std::uint64_t>(os, s.seed);
  for (const auto& p : s.nodes) {
    detail::put_le<double>(os, p.t);
    for (double v : p.x) detail::put_le<double>(os, v);
  }
  for (double v : s.values) detail::put_le<double>(os, v);
}

inline FieldSample read_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "FWS1", 4) != 0) throw Error("not a field sample");
  FieldSample s;
  const auto d = detail::get_le<std::uint32_t>(is);
  const auto n = detail::get_le<std::uint64_t>(is);
  s.k = static_cast<int>(detail::get_le<std::uint32_t>(is));
  s.replicates = detail::get_le<std::uint64_t>(is);
  s.seed = detail::get_le<std::uint64_t>(is);
  s.nodes.resize(n);
  for (auto& p : s.nodes) {
    p.t = detail::get_le<double>(is);
    p.x.resize(d);
    for (auto& v : p.x) v = detail::get_le<double>(is);
  }
  s.values.resize(s.replicates * static_cast<std::size_t>(s.k) * n);
  for (auto& v : s.values) v = detail::get_le<double>(is);
  return s;
}

// t,x1..xd,component,replicate,value
inline void write_csv(const FieldSample& s, std::ostream& os) {
  const std::size_t d = s.nodes.empty() ? 0 : s.nodes[0].x.size();
  os << "t";
  for (std::size_t i = 0; i < d; ++i) os << ",x" << (i + 1);
  os << ",component,replicate,value\n";
  for (std::size_t r = 0; r < s.replicates; ++r)
    for (int c = 0; c < s.k; ++c)
      for (std::size_t n = 0; n < s.nodes.size(); ++n) {
        os << format_double(s.nodes[n].t);
        for (double v : s.nodes[n].x) os << ',' << format_double(v);
        os << ',' << c << ',' << r << ',' << format_double(s.at(r, c, n)) << '\n';
      }
}

}  // namespace fracwave
