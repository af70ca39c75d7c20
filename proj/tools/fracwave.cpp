// fracwave command line: one subcommand per experiment.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "fracwave/fracwave.hpp"

namespace {

using fracwave::ExperimentKind;

bool compatible(const std::string& sub, ExperimentKind k) {
  if (sub == "exponent") return k == ExperimentKind::ExponentTime || k == ExperimentKind::ExponentSpace;
  return fracwave::to_string(k) == sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fracwave: stochastic wave equation with fractional-colored noise"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::string> outputDir;

  const std::map<std::string, std::string> subs{
      {"covariance", "Gram matrix on a grid, optionally with samples"},
      {"exponent", "log-log exponent of time or space increments"},
      {"blx-check", "empirical constants of the hitting criterion"},
      {"capacity", "Riesz capacity of target sets"},
      {"hausdorff", "covering upper bounds for target sets"},
      {"hitting", "Monte Carlo hitting frequencies against potential bounds"}};
  for (const auto& [name, help] : subs) {
    auto* sc = app.add_subcommand(name, help);
    sc->add_option("--config", config, "JSON experiment file")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", seed, "override the seed");
    sc->add_option("--replicates", replicates, "override the replicate count");
    sc->add_option("--output-dir", outputDir, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    const std::string text = fracwave::config_detail::slurp(config);
    auto j = fracwave::config_detail::parse_text(text, config);
    if (j.is_object() && !j.contains("experiment")) {
      if (sub == "exponent") j["experiment"] = "exponent-time";
      else j["experiment"] = sub;
    }
    if (seed) j["seed"] = *seed;
    if (replicates) j["replicates"] = *replicates;
    if (outputDir) j["outputDir"] = *outputDir;
    const auto cfg = fracwave::parse_config(j, std::filesystem::path(config).parent_path());
    if (!compatible(sub, cfg.experiment))
      throw fracwave::ConfigError("experiment", "'" + fracwave::to_string(cfg.experiment) +
                                                    "' cannot run under subcommand '" + sub + "'");
    const auto r = fracwave::run_experiment(cfg);
    std::cout << r.summary.dump(2) << '\n';
    return r.exitCode;
  } catch (const fracwave::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
