#pragma once

// Experiment harness behind the fracwave command line: configuration,
// the canonical experiments, and their CSV / JSON / SVG artifacts.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracwave/errors.hpp"
#include "fracwave/kernels.hpp"
#include "fracwave/model.hpp"
#include "fracwave/potential.hpp"
#include "fracwave/regularity.hpp"
#include "fracwave/sampler.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

using json = nlohmann::json;

enum class ExperimentKind { Covariance, ExponentTime, ExponentSpace, BlxCheck, Hitting, Capacity, Hausdorff };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Covariance: return "covariance";
    case ExperimentKind::ExponentTime: return "exponent-time";
    case ExperimentKind::ExponentSpace: return "exponent-space";
    case ExperimentKind::BlxCheck: return "blx-check";
    case ExperimentKind::Hitting: return "hitting";
    case ExperimentKind::Capacity: return "capacity";
    default: return "hausdorff";
  }
}

inline std::optional<ExperimentKind> parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::Covariance, ExperimentKind::ExponentTime, ExperimentKind::ExponentSpace,
                 ExperimentKind::BlxCheck, ExperimentKind::Hitting, ExperimentKind::Capacity,
                 ExperimentKind::Hausdorff})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct TargetSet {
  std::string id;
  double mesh = 0.05;
  std::vector<Box> boxes;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Covariance;
  ModelParams model;
  QuadratureConfig quad;
  GridSpec grid;
  std::size_t replicates = 0;
  std::uint64_t seed = 1;
  std::optional<std::string> targetSetPath;
  std::string outputDir = "out";
  // exponent experiments
  std::vector<double> lags;
  std::optional<double> baseTime;
  double slopeTolerance = 0.05;
  // hitting
  double dilationConstant = 3.0;
  HittingVariant variant = HittingVariant::SpaceTime;
  // capacity / hausdorff
  std::optional<double> order;
  double solverTol = 1e-8;
  std::vector<double> refinement;  // mesh sizes for the capacity study
  std::string ledger = "ledger.csv";
  std::filesystem::path baseDir;   // directory of the config file
};

namespace config_detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + key, "missing field");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline long long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long long>();
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Either an explicit list or {"start", "stop", "count"[, "spacing": "geometric"]}.
inline std::vector<double> sequence(const json& j, const std::string& path) {
  if (j.is_array()) return numbers(j, path);
  if (!j.is_object()) throw ConfigError(path, "expected a list or {start, stop, count}");
  const double a = number(require(j, "start", path + "."), path + ".start");
  const double b = number(require(j, "stop", path + "."), path + ".stop");
  const long long n = integer(require(j, "count", path + "."), path + ".count");
  if (n < 1) throw ConfigError(path + ".count", "must be positive");
  const bool geo = j.contains("spacing") && j["spacing"] == "geometric";
  if (geo && !(a > 0.0 && b > 0.0)) throw ConfigError(path, "geometric spacing needs positive ends");
  std::vector<double> out;
  for (long long i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(geo ? a * std::pow(b / a, f) : a + (b - a) * f);
  }
  if (n > 1) out.back() = b;
  return out;
}

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", what + ": " + e.what());
  }
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace config_detail

inline TargetSet parse_target_set(const json& j, const std::string& path) {
  using namespace config_detail;
  TargetSet ts;
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw ConfigError(path + "id", "expected a string");
    ts.id = j["id"].get<std::string>();
  }
  ts.mesh = number(require(j, "mesh", path), path + "mesh");
  if (!(ts.mesh > 0.0)) throw ConfigError(path + "mesh", "must be positive");
  const json& boxes = require(j, "boxes", path);
  if (!boxes.is_array()) throw ConfigError(path + "boxes", "expected an array");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::string bp = path + "boxes[" + std::to_string(i) + "].";
    Box b;
    b.min = numbers(require(boxes[i], "min", bp), bp + "min");
    b.max = numbers(require(boxes[i], "max", bp), bp + "max");
    if (b.min.size() != b.max.size()) throw ConfigError(bp + "max", "dimension differs from min");
    for (std::size_t c = 0; c < b.min.size(); ++c)
      if (b.max[c] < b.min[c]) throw ConfigError(bp + "max", "below min");
    if (!ts.boxes.empty() && b.min.size() != ts.boxes[0].min.size())
      throw ConfigError(bp + "min", "dimension differs from earlier boxes");
    ts.boxes.push_back(b);
  }
  return ts;
}

/// A geometry file holds one set object or {"sets": [...]}.
inline std::vector<TargetSet> load_target_sets(const std::filesystem::path& p) {
  const std::string text = config_detail::slurp(p);
  const json j = config_detail::parse_text(text, p.string());
  std::vector<TargetSet> out;
  if (j.contains("sets")) {
    if (!j["sets"].is_array()) throw ConfigError("sets", "expected an array");
    for (std::size_t i = 0; i < j["sets"].size(); ++i) {
      out.push_back(parse_target_set(j["sets"][i], "sets[" + std::to_string(i) + "]."));
      if (out.back().id.empty()) out.back().id = "set" + std::to_string(i);
    }
  } else {
    out.push_back(parse_target_set(j, ""));
    if (out.back().id.empty()) out.back().id = p.stem().string();
  }
  return out;
}

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& baseDir = {}) {
  using namespace config_detail;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.baseDir = baseDir;
  if (j.contains("experiment")) {
    if (!j["experiment"].is_string()) throw ConfigError("experiment", "expected a string");
    const auto k = parse_kind(j["experiment"].get<std::string>());
    if (!k) throw ConfigError("experiment", "unknown experiment '" + j["experiment"].get<std::string>() + "'");
    cfg.experiment = *k;
  }
  const bool needs_model = cfg.experiment != ExperimentKind::Capacity &&
                           cfg.experiment != ExperimentKind::Hausdorff;
  if (j.contains("model") || needs_model) {
    const json& m = require(j, "model", "");
    cfg.model.hurst.H = number(require(m, "H", "model."), "model.H");
    cfg.model.beta = number(require(m, "beta", "model."), "model.beta");
    cfg.model.d = static_cast<int>(integer(require(m, "d", "model."), "model.d"));
    if (m.contains("k")) cfg.model.k = static_cast<int>(integer(m["k"], "model.k"));
    if (m.contains("t0")) cfg.model.t0 = number(m["t0"], "model.t0");
    if (m.contains("T")) cfg.model.T = number(m["T"], "model.T");
    if (m.contains("M")) cfg.model.M = number(m["M"], "model.M");
    try {
      cfg.model.validate();
    } catch (const DomainError& e) {
      throw ConfigError("model", e.what());
    }
  }
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    if (q.contains("relTol")) cfg.quad.relTol = number(q["relTol"], "quadrature.relTol");
    if (q.contains("absTol")) cfg.quad.absTol = number(q["absTol"], "quadrature.absTol");
    if (q.contains("jacobiNodes"))
      cfg.quad.jacobiNodes = static_cast<std::size_t>(integer(q["jacobiNodes"], "quadrature.jacobiNodes"));
    if (q.contains("panelPerOscillation"))
      cfg.quad.panelPerOscillation =
          static_cast<std::size_t>(integer(q["panelPerOscillation"], "quadrature.panelPerOscillation"));
    if (q.contains("maxPanels"))
      cfg.quad.maxPanels = static_cast<std::size_t>(integer(q["maxPanels"], "quadrature.maxPanels"));
    try {
      cfg.quad.validate();
    } catch (const DomainError& e) {
      throw ConfigError("quadrature", e.what());
    }
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    cfg.grid.times = sequence(require(g, "times", "grid."), "grid.times");
    const json& s = require(g, "sites", "grid.");
    if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i)
        cfg.grid.sites.push_back(numbers(s[i], "grid.sites[" + std::to_string(i) + "]"));
    } else {
      // tensor grid: per-coordinate {start, stop, count}, or one spec for all
      std::vector<std::vector<double>> axes;
      if (s.contains("axes")) {
        for (std::size_t i = 0; i < s["axes"].size(); ++i)
          axes.push_back(sequence(s["axes"][i], "grid.sites.axes[" + std::to_string(i) + "]"));
      } else {
        const auto axis = sequence(s, "grid.sites");
        axes.assign(static_cast<std::size_t>(cfg.model.d), axis);
      }
      std::vector<std::size_t> idx(axes.size(), 0);
      for (;;) {
        std::vector<double> p(axes.size());
        for (std::size_t c = 0; c < axes.size(); ++c) p[c] = axes[c][idx[c]];
        cfg.grid.sites.push_back(p);
        std::size_t c = 0;
        for (; c < axes.size(); ++c) {
          if (++idx[c] < axes[c].size()) break;
          idx[c] = 0;
        }
        if (c == axes.size()) break;
      }
    }
    if (g.contains("maxNodes")) cfg.grid.maxNodes = static_cast<std::size_t>(integer(g["maxNodes"], "grid.maxNodes"));
    try {
      cfg.grid.validate(cfg.model.d);
    } catch (const DomainError& e) {
      throw ConfigError("grid", e.what());
    }
    for (double t : cfg.grid.times)
      if (t < cfg.model.t0 - 1e-12 || t > cfg.model.T + 1e-12)
        throw ConfigError("grid.times", "time " + format_double(t) + " outside [t0, T]");
    for (const auto& x : cfg.grid.sites)
      for (double v : x)
        if (std::abs(v) > cfg.model.M + 1e-12)
          throw ConfigError("grid.sites", "site coordinate " + format_double(v) + " outside [-M, M]");
  }
  if (j.contains("replicates")) {
    const long long r = integer(j["replicates"], "replicates");
    if (r < 0) throw ConfigError("replicates", "must be non-negative");
    cfg.replicates = static_cast<std::size_t>(r);
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError("seed", "expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("targetSet")) {
    if (!j["targetSet"].is_string()) throw ConfigError("targetSet", "expected a path");
    cfg.targetSetPath = j["targetSet"].get<std::string>();
  }
  if (j.contains("outputDir")) {
    if (!j["outputDir"].is_string()) throw ConfigError("outputDir", "expected a path");
    cfg.outputDir = j["outputDir"].get<std::string>();
  }
  if (j.contains("lags")) cfg.lags = sequence(j["lags"], "lags");
  if (j.contains("baseTime")) cfg.baseTime = number(j["baseTime"], "baseTime");
  if (j.contains("slopeTolerance")) cfg.slopeTolerance = number(j["slopeTolerance"], "slopeTolerance");
  if (j.contains("dilationConstant")) {
    cfg.dilationConstant = number(j["dilationConstant"], "dilationConstant");
    if (!(cfg.dilationConstant >= 0.0)) throw ConfigError("dilationConstant", "must be non-negative");
  }
  if (j.contains("variant")) {
    const std::string v = j["variant"].is_string() ? j["variant"].get<std::string>() : "";
    if (v == "spacetime") cfg.variant = HittingVariant::SpaceTime;
    else if (v == "fixed-time") cfg.variant = HittingVariant::FixedTime;
    else if (v == "fixed-space") cfg.variant = HittingVariant::FixedSpace;
    else throw ConfigError("variant", "expected spacetime, fixed-time or fixed-space");
  }
  if (j.contains("order")) cfg.order = number(j["order"], "order");
  if (j.contains("solverTol")) cfg.solverTol = number(j["solverTol"], "solverTol");
  if (j.contains("refinement")) cfg.refinement = sequence(j["refinement"], "refinement");
  if (j.contains("ledger")) {
    if (!j["ledger"].is_string()) throw ConfigError("ledger", "expected a file name");
    cfg.ledger = j["ledger"].get<std::string>();
  }

  switch (cfg.experiment) {
    case ExperimentKind::Covariance:
    case ExperimentKind::BlxCheck:
    case ExperimentKind::Hitting:
      if (cfg.grid.times.empty()) throw ConfigError("grid", "missing field");
      break;
    case ExperimentKind::ExponentTime:
    case ExperimentKind::ExponentSpace:
      if (cfg.lags.size() < 4) throw ConfigError("lags", "need at least 4 lags");
      for (double l : cfg.lags)
        if (!(l > 0.0)) throw ConfigError("lags", "lags must be positive");
      break;
    default: break;
  }
  if ((cfg.experiment == ExperimentKind::Hitting || cfg.experiment == ExperimentKind::Capacity ||
       cfg.experiment == ExperimentKind::Hausdorff) &&
      !cfg.targetSetPath)
    throw ConfigError("targetSet", "missing field");
  if (cfg.experiment == ExperimentKind::Hitting && cfg.replicates == 0)
    throw ConfigError("replicates", "hitting needs at least one replicate");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
  const std::string text = config_detail::slurp(p);
  return parse_config(config_detail::parse_text(text, p.string()), p.parent_path());
}

// ---------------------------------------------------------------- output

inline std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

/// Log-log scatter with a fitted line.
inline std::string loglog_svg(const std::vector<double>& x, const std::vector<double>& y, double slope,
                              double intercept, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  constexpr double W = 480, Hh = 360, m = 50;
  double x0 = HUGE_VAL, x1 = -HUGE_VAL, y0 = HUGE_VAL, y1 = -HUGE_VAL;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x0 = std::min(x0, std::log10(x[i]));
    x1 = std::max(x1, std::log10(x[i]));
    y0 = std::min(y0, std::log10(y[i]));
    y1 = std::max(y1, std::log10(y[i]));
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double lx) { return m + (lx - x0) / (x1 - x0) * (W - 2 * m); };
  auto py = [&](double ly) { return Hh - m - (ly - y0) / (y1 - y0) * (Hh - 2 * m); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  s << "<line x1=\"" << m << "\" y1=\"" << Hh - m << "\" x2=\"" << W - m << "\" y2=\"" << Hh - m
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << Hh - m
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"" << Hh - 12 << "\" text-anchor=\"middle\" font-size=\"11\">log10 "
    << xlabel << "</text>\n";
  s << "<text x=\"14\" y=\"" << Hh / 2 << "\" font-size=\"11\" transform=\"rotate(-90 14 " << Hh / 2
    << ")\" text-anchor=\"middle\">log10 " << ylabel << "</text>\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    s << "<circle cx=\"" << px(std::log10(x[i])) << "\" cy=\"" << py(std::log10(y[i]))
      << "\" r=\"3\" fill=\"steelblue\"/>\n";
  auto fit = [&](double lx) { return (intercept + slope * lx * std::log(10.0)) / std::log(10.0); };
  s << "<line x1=\"" << px(x0) << "\" y1=\"" << py(fit(x0)) << "\" x2=\"" << px(x1) << "\" y2=\""
    << py(fit(x1)) << "\" stroke=\"crimson\"/>\n";
  s << "<text x=\"" << W - m << "\" y=\"" << m << "\" text-anchor=\"end\" font-size=\"11\">slope "
    << format_double(std::round(slope * 1e4) / 1e4) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

struct RunResult {
  int exitCode = 0;
  json summary;
};

// ---------------------------------------------------------------- hitting

struct HittingResult {
  double pHat = 0.0;
  double stderr_ = 0.0;
  double capLower = 0.0;
  double hausUpper = 0.0;
  double order = 0.0;
  double dilation = 0.0;
  std::size_t hits = 0;
  bool signViolation = false;
};

inline double distance_to_box(const double* u, std::size_t k, const Box& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double e = std::max({b.min[c] - u[c], 0.0, u[c] - b.max[c]});
    s += e * e;
  }
  return std::sqrt(s);
}

/// Replicates whose field meets the target dilated by `dilation`.
inline std::vector<char> hit_flags(const FieldSample& s, const std::vector<Box>& boxes, double dilation) {
  std::vector<char> hit(s.replicates, 0);
  const std::size_t n = s.nodeCount();
  const auto k = static_cast<std::size_t>(s.k);
  std::vector<double> u(k);
  for (std::size_t r = 0; r < s.replicates && !boxes.empty(); ++r) {
    for (std::size_t node = 0; node < n && !hit[r]; ++node) {
      for (std::size_t c = 0; c < k; ++c) u[c] = s.at(r, static_cast<int>(c), node);
      for (const Box& b : boxes)
        if (distance_to_box(u.data(), k, b) <= dilation) {
          hit[r] = 1;
          break;
        }
    }
  }
  return hit;
}

inline double grid_dilation(const GridSpec& grid, const ModelParams& mp, double c) {
  return c * std::pow(grid.mesh(), 0.5 * mp.gamma());
}

/// Monte Carlo hitting frequency for one target against a shared sample,
/// with the potential-theory bounds for the same target.
inline HittingResult estimate_hitting(const FieldSample& s, const TargetSet& target, const ModelParams& mp,
                                      double dilation, HittingVariant variant = HittingVariant::SpaceTime,
                                      double solverTol = 1e-8) {
  HittingResult h;
  h.dilation = dilation;
  for (const Box& b : target.boxes)
    if (static_cast<int>(b.min.size()) != mp.k)
      throw DomainError("target box dimension differs from k = " + std::to_string(mp.k));
  const auto flags = hit_flags(s, target.boxes, dilation);
  for (char f : flags) h.hits += static_cast<std::size_t>(f);
  const double R = static_cast<double>(s.replicates);
  h.pHat = R > 0 ? static_cast<double>(h.hits) / R : 0.0;
  h.stderr_ = R > 0 ? std::sqrt(h.pHat * (1.0 - h.pHat) / R) : 0.0;
  CapacityOptions opt;
  opt.solverTol = solverTol;
  const auto hb = hitting_bounds(discretize_boxes(target.boxes, target.mesh), mp, target.mesh, variant, opt);
  h.order = hb.order;
  h.capLower = hb.capLower;
  h.hausUpper = target.boxes.empty() ? 0.0 : hb.hausUpper;
  h.signViolation = (h.capLower > 0.0 && h.pHat + 4.0 * h.stderr_ == 0.0) ||
                    (h.hausUpper == 0.0 && h.pHat - 4.0 * h.stderr_ > 0.0);
  return h;
}

// ---------------------------------------------------------------- runners

namespace run_detail {

inline std::filesystem::path resolve(const ExperimentConfig& cfg, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !cfg.baseDir.empty() && !std::filesystem::exists(path)) return cfg.baseDir / path;
  return path;
}

}  // namespace run_detail

/// Samples the configured grid and scores the first target of the geometry file.
inline HittingResult estimate_hitting(const ExperimentConfig& cfg) {
  if (!cfg.targetSetPath) throw ConfigError("targetSet", "missing field");
  if (!cfg.model.sharpRegime()) throw DomainError("hitting bounds need beta > 2H - 1");
  const auto sets = load_target_sets(run_detail::resolve(cfg, *cfg.targetSetPath));
  const GramMatrix g = assemble_gram(cfg.grid, cfg.model, cfg.quad);
  const FieldSample s = sample_field(g, cfg.model.k, cfg.replicates, cfg.seed);
  return estimate_hitting(s, sets.front(), cfg.model, grid_dilation(cfg.grid, cfg.model, cfg.dilationConstant),
                          cfg.variant, cfg.solverTol);
}

namespace run_detail {

inline json model_json(const ModelParams& mp) {
  return {{"H", mp.H()}, {"beta", mp.beta}, {"d", mp.d}, {"k", mp.k}, {"t0", mp.t0}, {"T", mp.T},
          {"M", mp.M}, {"gamma", mp.gamma()}, {"sharpRegime", mp.sharpRegime()}};
}

inline std::string nodes_csv(const std::vector<SpaceTimePoint>& nodes) {
  std::ostringstream s;
  s << "# node index = time index * sites + site index; t and x in model units\nnode,t";
  const std::size_t d = nodes.empty() ? 0 : nodes[0].x.size();
  for (std::size_t i = 0; i < d; ++i) s << ",x" << (i + 1);
  s << '\n';
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    s << i << ',' << format_double(nodes[i].t);
    for (double v : nodes[i].x) s << ',' << format_double(v);
    s << '\n';
  }
  return s.str();
}

inline std::string gram_csv(const GramMatrix& g) {
  std::ostringstream s;
  s << "# one row per unordered node pair, i <= j\ni,j,covariance\n";
  for (Eigen::Index i = 0; i < g.entries.rows(); ++i)
    for (Eigen::Index j = i; j < g.entries.cols(); ++j)
      s << i << ',' << j << ',' << format_double(g.entries(i, j)) << '\n';
  return s.str();
}

inline RunResult run_covariance(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const GramMatrix g = assemble_gram(cfg.grid, cfg.model, cfg.quad);
  write_text(out / "nodes.csv", nodes_csv(g.nodes));
  write_text(out / "gram.csv", gram_csv(g));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.entries, Eigen::EigenvaluesOnly);
  const double minEig = es.eigenvalues().minCoeff();
  const double trace = g.entries.trace();
  RunResult r;
  r.summary["minEigenvalue"] = minEig;
  r.summary["trace"] = trace;
  r.summary["nodes"] = g.nodes.size();
  const bool psd = minEig >= -1e-8 * trace;
  r.summary["psd"] = psd;
  if (cfg.replicates > 0) {
    const FieldSample s = sample_field(g, cfg.model.k, cfg.replicates, cfg.seed);
    std::ofstream csv(out / "samples.csv", std::ios::binary);
    write_csv(s, csv);
    std::ofstream bin(out / "samples.bin", std::ios::binary);
    write_binary(s, bin);
    r.summary["jitterApplied"] = s.jitterApplied;
    r.summary["replicates"] = cfg.replicates;
  }
  r.exitCode = psd ? 0 : 2;
  return r;
}

inline RunResult run_exponent(const ExperimentConfig& cfg, const std::filesystem::path& out, bool time) {
  const ModelParams& mp = cfg.model;
  std::vector<double> lags = cfg.lags;
  std::sort(lags.begin(), lags.end());
  const double base = cfg.baseTime.value_or(time ? mp.t0 : mp.T);
  if (time && base + lags.back() > mp.T + 1e-12)
    throw ConfigError("lags", "base time plus largest lag exceeds T");
  std::vector<double> vals(lags.size());
  parallel_for(lags.size(), [&](std::size_t i) {
    if (time) {
      vals[i] = time_increment_variance(base, lags[i], mp, cfg.quad);
    } else {
      std::vector<double> z(static_cast<std::size_t>(mp.d), 0.0);
      z[0] = lags[i];
      vals[i] = space_increment_variance(base, z, mp, cfg.quad);
    }
  });
  const double predicted = std::min(mp.gamma(), 2.0);
  const ExponentFit fit = fit_exponent(lags, vals, predicted);
  std::ostringstream s;
  s << "# " << (time ? "E|u(t+h,x)-u(t,x)|^2 against h" : "E|u(t,x+z)-u(t,x)|^2 against |z|")
    << " at t = " << format_double(base) << "\nlag,value\n";
  for (std::size_t i = 0; i < lags.size(); ++i) s << format_double(lags[i]) << ',' << format_double(vals[i]) << '\n';
  write_text(out / "exponent.csv", s.str());
  write_text(out / "exponent.svg",
             loglog_svg(lags, vals, fit.slope, fit.intercept, time ? "time increments" : "space increments",
                        time ? "h" : "|z|", "second moment"));
  RunResult r;
  r.summary["fit"] = fit;
  r.summary["baseTime"] = base;
  r.summary["slopeTolerance"] = cfg.slopeTolerance;
  const bool ok = std::abs(fit.slope - predicted) <= cfg.slopeTolerance;
  r.summary["withinTolerance"] = ok;
  r.exitCode = ok ? 0 : 2;
  return r;
}

inline RunResult run_blx(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const GramMatrix g = assemble_gram(cfg.grid, cfg.model, cfg.quad);
  write_text(out / "nodes.csv", nodes_csv(g.nodes));
  write_text(out / "gram.csv", gram_csv(g));
  const BlxReport rep = check_blx(g, cfg.model);
  std::ostringstream s;
  s << "# second moment of the increment over the metric |t-s|^g + |x-y|^g\ni,j,increment,metric,ratio\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const double rho2 = std::max(0.0, g.entries(ii, ii) + g.entries(jj, jj) - 2.0 * g.entries(ii, jj));
      const double m = joint_metric(g.nodes[i], g.nodes[j], cfg.model);
      s << i << ',' << j << ',' << format_double(rho2) << ',' << format_double(m) << ','
        << format_double(rho2 / m) << '\n';
    }
  write_text(out / "increments.csv", s.str());
  RunResult r;
  r.summary["blx"] = rep;
  r.summary["incrementRatioSpread"] = rep.incrementLower > 0 ? rep.incrementUpper / rep.incrementLower : HUGE_VAL;
  r.exitCode = rep.pass ? 0 : 2;
  return r;
}

inline void append_ledger(const std::filesystem::path& p, const std::string& id, double order, double cap,
                          double haus, double mesh, double gap) {
  const bool fresh = !std::filesystem::exists(p);
  std::ofstream out(p, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to " + p.string());
  if (fresh) out << "set,order,capacity,hausdorff,mesh,gap\n";
  out << id << ',' << format_double(order) << ',' << format_double(cap) << ',' << format_double(haus) << ','
      << format_double(mesh) << ',' << format_double(gap) << '\n';
}

inline double potential_order(const ExperimentConfig& cfg) {
  if (cfg.order) return *cfg.order;
  return hitting_order(cfg.model, cfg.variant);
}

inline RunResult run_potential(const ExperimentConfig& cfg, const std::filesystem::path& out, bool cap_study) {
  const auto sets = load_target_sets(resolve(cfg, *cfg.targetSetPath));
  const double order = potential_order(cfg);
  std::ostringstream s;
  RunResult r;
  if (cap_study) s << "# capacity of each set on successively finer cells\nset,mesh,cells,capacity,energy,gap,iterations\n";
  else s << "# covering sums at each ball radius\nset,epsilon,balls,sum\n";
  CapacityOptions opt;
  opt.solverTol = cfg.solverTol;
  json arr = json::array();
  for (const auto& ts : sets) {
    const CellSet cells = discretize_boxes(ts.boxes, ts.mesh);
    const double n0 = cells.empty() ? 1.0 : default_n0(cells);
    CapacityResult cap;
    if (!cells.empty()) cap = capacity(cells, {order, n0}, opt);
    const auto levels = default_mesh_levels(ts.mesh);
    const CoveringEstimate cov = cells.empty() ? CoveringEstimate{order, 0.0, 0, 0.0}
                                               : hausdorff_upper(cells, order, levels);
    if (cap_study) {
      std::vector<double> meshes = cfg.refinement.empty() ? std::vector<double>{ts.mesh} : cfg.refinement;
      for (double mesh : meshes) {
        const CellSet c2 = discretize_boxes(ts.boxes, mesh);
        if (c2.empty()) continue;
        const auto cr = capacity(c2, {order, default_n0(c2)}, opt);
        s << ts.id << ',' << format_double(mesh) << ',' << c2.size() << ',' << format_double(cr.capacity) << ','
          << format_double(cr.minEnergy) << ',' << format_double(cr.gap) << ',' << cr.iterations << '\n';
      }
    } else if (!cells.empty() && order >= 0.0) {
      for (double eps : levels) {
        const auto one = hausdorff_upper(cells, order, {eps});
        s << ts.id << ',' << format_double(eps) << ',' << one.ballCount << ',' << format_double(one.radiiSum) << '\n';
      }
    }
    append_ledger(out / cfg.ledger, ts.id, order, cap.capacity, cov.radiiSum, ts.mesh, cap.gap);
    arr.push_back({{"set", ts.id}, {"order", order}, {"capacity", cap.capacity},
                   {"hausdorffUpper", std::isfinite(cov.radiiSum) ? json(cov.radiiSum) : json("inf")},
                   {"cells", cells.size()}, {"gap", cap.gap}});
  }
  write_text(out / (cap_study ? "capacity.csv" : "hausdorff.csv"), s.str());
  r.summary["sets"] = arr;
  r.exitCode = 0;
  return r;
}

inline RunResult run_hitting(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const ModelParams& mp = cfg.model;
  if (!mp.sharpRegime()) throw ConfigError("model.beta", "hitting bounds need beta > 2H - 1");
  const auto sets = load_target_sets(resolve(cfg, *cfg.targetSetPath));
  const GramMatrix g = assemble_gram(cfg.grid, mp, cfg.quad);
  const FieldSample s = sample_field(g, mp.k, cfg.replicates, cfg.seed);
  const double c = cfg.dilationConstant;
  std::ostringstream csv;
  csv << "# Monte Carlo hits per target and dilation constant (common random numbers)\n"
         "set,dilationConstant,dilation,hits,replicates,pHat,stderr\n";
  RunResult r;
  json arr = json::array();
  bool violation = false;
  for (const auto& ts : sets) {
    json sens = json::array();
    for (double cc : {0.5 * c, c, 2.0 * c}) {
      const double dil = grid_dilation(cfg.grid, mp, cc);
      std::size_t hits = 0;
      for (char f : hit_flags(s, ts.boxes, dil)) hits += static_cast<std::size_t>(f);
      const double p = static_cast<double>(hits) / static_cast<double>(cfg.replicates);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.replicates));
      csv << ts.id << ',' << format_double(cc) << ',' << format_double(dil) << ',' << hits << ','
          << cfg.replicates << ',' << format_double(p) << ',' << format_double(se) << '\n';
      sens.push_back({{"dilationConstant", cc}, {"pHat", p}});
    }
    const HittingResult h =
        estimate_hitting(s, ts, mp, grid_dilation(cfg.grid, mp, c), cfg.variant, cfg.solverTol);
    violation = violation || h.signViolation;
    json e = {{"set", ts.id},
              {"pHat", h.pHat},
              {"stderr", h.stderr_},
              {"capLower", h.capLower},
              {"hausUpper", std::isfinite(h.hausUpper) ? json(h.hausUpper) : json("inf")},
              {"order", h.order},
              {"dilation", h.dilation},
              {"signViolation", h.signViolation},
              {"sensitivity", sens}};
    // implied constants of the sandwich, reported only
    if (h.capLower > 0.0) e["lowerConstant"] = h.pHat / h.capLower;
    if (h.hausUpper > 0.0 && std::isfinite(h.hausUpper)) e["upperConstant"] = h.pHat / h.hausUpper;
    arr.push_back(e);
  }
  write_text(out / "hitting.csv", csv.str());
  r.summary["targets"] = arr;
  r.summary["gridMesh"] = cfg.grid.mesh();
  r.summary["jitterApplied"] = s.jitterApplied;
  r.exitCode = violation ? 2 : 0;
  return r;
}

}  // namespace run_detail

/// Runs one experiment, writing CSV, SVG and summary.json under outputDir.
/// Exit code 0 = checks passed, 2 = a check failed.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  const std::filesystem::path out(cfg.outputDir);
  std::filesystem::create_directories(out);
  RunResult r;
  switch (cfg.experiment) {
    case ExperimentKind::Covariance: r = run_detail::run_covariance(cfg, out); break;
    case ExperimentKind::ExponentTime: r = run_detail::run_exponent(cfg, out, true); break;
    case ExperimentKind::ExponentSpace: r = run_detail::run_exponent(cfg, out, false); break;
    case ExperimentKind::BlxCheck: r = run_detail::run_blx(cfg, out); break;
    case ExperimentKind::Hitting: r = run_detail::run_hitting(cfg, out); break;
    case ExperimentKind::Capacity: r = run_detail::run_potential(cfg, out, true); break;
    case ExperimentKind::Hausdorff: r = run_detail::run_potential(cfg, out, false); break;
  }
  r.summary["experiment"] = to_string(cfg.experiment);
  r.summary["seed"] = cfg.seed;
  if (cfg.experiment != ExperimentKind::Capacity && cfg.experiment != ExperimentKind::Hausdorff)
    r.summary["model"] = run_detail::model_json(cfg.model);
  r.summary["exitCode"] = r.exitCode;
  r.summary["timestamp"] = timestamp_utc();
  write_text(out / "summary.json", r.summary.dump(2) + "\n");
  return r;
}

}  // namespace fracwave
