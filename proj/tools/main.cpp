#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "experiment.hpp"
#include "loopsoup/loops.hpp"

namespace {

enum Exit { kOk = 0, kChecksFailed = 1, kConfigError = 2, kRuntimeError = 3 };

}  // namespace

int main(int argc, char** argv) {
  using loopsoup::cli::Config;
  CLI::App app{"Markov loop soups on regular multigraphs: sampling, enumeration and resampling checks"};
  app.require_subcommand(1);

  std::string config_path, prop;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  loopsoup::cli::RunOptions options;

  const auto common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->add_option("--out", options.out, "Output directory")->capture_default_str();
    cmd->add_flag("--parallel", options.parallel, "Run the jobs concurrently");
    cmd->add_flag("--quiet", options.quiet, "No progress lines on stderr");
    cmd->add_option("--set", overrides, "key=value override, repeatable");
  };

  auto* run = app.add_subcommand("run", "Run every job of a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  common(run);

  auto* verify = app.add_subcommand("verify", "Run one check, with an optional config for the rest");
  verify->add_option("prop", prop, "Job name")->required()->check(CLI::IsMember(loopsoup::cli::job_names()));
  verify->add_option("config", config_path, "Config file")->check(CLI::ExistingFile);
  common(verify);

  std::string graph = "cycle:3";
  int g = 3, killing = 1, L_max = 6;
  std::string orientation = "both";
  auto* enumerate = app.add_subcommand("enumerate", "Write the loop catalog of a domain");
  enumerate->add_option("--graph", graph, "Builtin shape or graph file")->capture_default_str();
  enumerate->add_option("--g", g, "Regularized degree")->capture_default_str();
  enumerate->add_option("--killing", killing, "Killing edges per vertex")->capture_default_str();
  enumerate->add_option("--L-max", L_max, "Longest loop")->capture_default_str();
  enumerate->add_option("--orientation", orientation, "oriented, unoriented or both")->capture_default_str();
  common(enumerate);

  CLI11_PARSE(app, argc, argv);

  try {
    Config config;
    if (!config_path.empty()) {
      config = Config::load(config_path);
    } else {
      std::istringstream empty;
      config = Config::parse(empty, "command line");
    }
    if (verify->parsed()) config.set("jobs=" + prop);
    if (enumerate->parsed()) {
      config.set("jobs=enumerate");
      config.set("graph=" + graph);
      config.set("g=" + std::to_string(g));
      config.set("killing=" + std::to_string(killing));
      config.set("L_max=" + std::to_string(L_max));
      config.set("orientation=" + orientation);
      if (!seed && !config.has("", "seed")) config.set("seed=0");  // enumeration draws nothing
    }
    for (const auto& o : overrides) config.set(o);
    if (seed) config.set("seed=" + std::to_string(*seed));

    const auto result = loopsoup::cli::run(config, options);
    if (!options.quiet) {
      std::cerr << "verdict: " << result.report["verdict"].get<std::string>() << " (" << (options.out / "report.json").string()
                << ")\n";
    }
    return result.failed ? kChecksFailed : kOk;
  } catch (const loopsoup::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const loopsoup::BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << " (raise LOOPSOUP_MAX_CLASSES or lower L_max)\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
