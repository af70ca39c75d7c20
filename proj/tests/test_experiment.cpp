#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracwave/experiment.hpp"

using namespace fracwave;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = FRACWAVE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fracwave_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config(const std::string& name, const std::string& out) {
  auto cfg = load_config(kConfigs / (name + ".json"));
  cfg.outputDir = scratch(out).string();
  return cfg;
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "<none>";
}

}  // namespace

TEST(Config, EveryShippedConfigParses) {
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    const auto name = e.path().filename().string();
    if (name.rfind("targets_", 0) == 0) continue;
    EXPECT_NO_THROW(load_config(e.path())) << name;
  }
}

TEST(Config, ErrorsNameTheField) {
  const json base = {{"experiment", "covariance"},
                     {"model", {{"H", 0.7}, {"beta", 0.8}, {"d", 1}}},
                     {"grid", {{"times", {0.5, 1.0}}, {"sites", {{0.0}}}}}};
  EXPECT_EQ(field_of(base), "<none>");
  json j = base;
  j["model"]["beta"] = 2.4;
  EXPECT_EQ(field_of(j), "model");
  j = base;
  j["experiment"] = "nope";
  EXPECT_EQ(field_of(j), "experiment");
  j = base;
  j["grid"]["times"] = {0.5, 2.0};
  EXPECT_EQ(field_of(j), "grid.times");
  j = base;
  j["replicates"] = -1;
  EXPECT_EQ(field_of(j), "replicates");
  j = base;
  j["experiment"] = "hitting";
  EXPECT_EQ(field_of(j), "targetSet");
  j = base;
  j["experiment"] = "exponent-time";
  j["lags"] = {0.1, 0.2};
  EXPECT_EQ(field_of(j), "lags");
  j = base;
  j["model"].erase("H");
  EXPECT_NE(field_of(j).find("model"), std::string::npos);
}

TEST(Config, MalformedJsonReportsPosition) {
  try {
    config_detail::parse_text("{\"a\": 1\n \"b\": 2}", "x.json");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("x.json"), std::string::npos);
    EXPECT_NE(m.find("line 2"), std::string::npos) << m;
  }
}

TEST(Config, GeometricSequence) {
  const json j = {{"start", 0.25}, {"stop", 4.0}, {"count", 5}, {"spacing", "geometric"}};
  const auto v = config_detail::sequence(j, "lags");
  ASSERT_EQ(v.size(), 5u);
  EXPECT_NEAR(v[1], 0.5, 1e-15);
  EXPECT_EQ(v.back(), 4.0);
}

TEST(Run, ExponentTimeSlope) {
  const auto cfg = config("exponent_time", "exp_time");
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.exitCode, 0);
  const double slope = r.summary["fit"]["slope"].get<double>();
  EXPECT_NEAR(slope, 1.4, 0.05);
  EXPECT_TRUE(fs::exists(fs::path(cfg.outputDir) / "exponent.csv"));
  EXPECT_EQ(slurp(fs::path(cfg.outputDir) / "exponent.svg").rfind("<svg", 0), 0u);
}

TEST(Run, CovarianceWritesGramAndSamples) {
  const auto cfg = config("covariance_d1", "cov");
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.exitCode, 0);
  EXPECT_TRUE(r.summary["psd"].get<bool>());
  const fs::path out(cfg.outputDir);
  for (const char* f : {"nodes.csv", "gram.csv", "samples.csv", "samples.bin", "summary.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  std::ifstream bin(out / "samples.bin", std::ios::binary);
  const auto back = read_binary(bin);
  EXPECT_EQ(back.replicates, cfg.replicates);
  EXPECT_EQ(back.seed, cfg.seed);
}

TEST(Run, CsvBytesAreReproducible) {
  auto a = config("covariance_d1", "rep_a"), b = config("covariance_d1", "rep_b");
  run_experiment(a);
  run_experiment(b);
  for (const char* f : {"nodes.csv", "gram.csv", "samples.csv"})
    EXPECT_EQ(slurp(fs::path(a.outputDir) / f), slurp(fs::path(b.outputDir) / f)) << f;
}

TEST(Run, HittingSummary) {
  const auto cfg = config("hitting", "hit");
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.exitCode, 0);
  for (const auto& t : r.summary["targets"]) {
    const auto id = t["set"].get<std::string>();
    if (id == "everything") {
      EXPECT_EQ(t["pHat"].get<double>(), 1.0);
    }
    if (id == "empty") {
      EXPECT_EQ(t["pHat"].get<double>(), 0.0);
    }
    EXPECT_FALSE(t["signViolation"].get<bool>()) << id;
    EXPECT_EQ(t["sensitivity"].size(), 3u);
  }
  const std::string csv = slurp(fs::path(cfg.outputDir) / "hitting.csv");
  EXPECT_NE(csv.find("set,dilationConstant,dilation,hits,replicates,pHat,stderr"), std::string::npos);
}

TEST(Run, HittingMonotoneInDilation) {
  const auto cfg = config("hitting", "hit_dil");
  const auto sets = load_target_sets(kConfigs / *cfg.targetSetPath);
  const auto s = sample_field(assemble_gram(cfg.grid, cfg.model), 1, 500, 3);
  std::size_t prev = 0;
  for (double c : {0.5, 1.0, 2.0, 4.0}) {
    std::size_t hits = 0;
    for (char f : hit_flags(s, sets[2].boxes, grid_dilation(cfg.grid, cfg.model, c))) hits += f;
    EXPECT_GE(hits, prev);
    prev = hits;
  }
}

TEST(Run, EstimateHittingFromConfig) {
  const auto cfg = config("hitting", "hit_cfg");
  const auto h = estimate_hitting(cfg);
  EXPECT_EQ(h.pHat, 1.0);  // the first set covers every value
  EXPECT_EQ(h.stderr_, 0.0);
  EXPECT_FALSE(h.signViolation);
}

TEST(Run, EmptyTargetNeverHit) {
  const auto cfg = config("hitting", "hit_empty");
  const auto s = sample_field(assemble_gram(cfg.grid, cfg.model), 1, 100, 4);
  TargetSet empty;
  empty.id = "empty";
  const auto h = estimate_hitting(s, empty, cfg.model, 1.0);
  EXPECT_EQ(h.pHat, 0.0);
  EXPECT_EQ(h.hausUpper, 0.0);
  EXPECT_FALSE(h.signViolation);
}

TEST(Run, CapacityAndHausdorffLedger) {
  auto cap = config("capacity", "pot");
  auto haus = config("hausdorff", "pot");
  EXPECT_EQ(run_experiment(cap).exitCode, 0);
  EXPECT_EQ(run_experiment(haus).exitCode, 0);
  const fs::path out(cap.outputDir);
  EXPECT_TRUE(fs::exists(out / "capacity.csv"));
  EXPECT_TRUE(fs::exists(out / "hausdorff.csv"));
  std::istringstream ledger(slurp(out / cap.ledger));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(ledger, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_GT(rows, 2u);  // header plus rows from both runs
}

TEST(Run, BlxCheckPasses) {
  const auto cfg = config("blx_check", "blx");
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.exitCode, 0);
  EXPECT_TRUE(r.summary["blx"]["pass"].get<bool>());
  EXPECT_LE(r.summary["incrementRatioSpread"].get<double>(), 10.0);
}
