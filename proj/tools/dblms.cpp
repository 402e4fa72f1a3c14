#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dblms/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace dblms::cli;

  CLI::App app{"Delayed-block LMS predictors and Monte Carlo experiments"};
  app.require_subcommand(1);

  RunManifest manifest;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string format = "csv";

  const std::map<std::string, Command> commands{
      {"predict", Command::predict},     {"run", Command::run},
      {"sweep", Command::sweep},         {"table2", Command::table2},
      {"fig-alpha", Command::fig_alpha}, {"fig-bound", Command::fig_bound}};
  const std::map<std::string, const char*> help{
      {"predict", "closed-form predictions for each (D, L) pair"},
      {"run", "ensemble convergence curves, one file per (D, L) pair"},
      {"sweep", "simulated versus analytic stability bound"},
      {"table2", "estimated and simulated misadjustment and slope, 12 rows"},
      {"fig-alpha", "slope factor versus D and versus L"},
      {"fig-bound", "analytic stability bound along the sweep axis"}};

  for (const auto& [name, cmd] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    auto* cfg = sub->add_option("--config", config_path, "JSON configuration file");
    if (cmd == Command::predict || cmd == Command::run || cmd == Command::sweep) {
      cfg->required();
    }
    sub->add_option("--out", manifest.output_dir, "output directory (created if absent)")
        ->required();
    sub->add_option("--seed", seed, "override experiment.seed");
    sub->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->callback([&manifest, cmd = cmd] { manifest.command = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  for (const auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) manifest.seed_override = seed;
  }
  if (!config_path.empty()) manifest.config_path = config_path;
  manifest.format = format == "json" ? OutputFormat::json : OutputFormat::csv;

  try {
    return run_command(manifest, std::cerr);
  } catch (const dblms::ConfigError& e) {
    std::cerr << "dblms: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const dblms::OutOfBoundError& e) {
    std::cerr << "dblms: " << e.what() << "\n";
    return kUnstable;
  } catch (const dblms::EnsembleError& e) {
    std::cerr << "dblms: " << e.what() << "\n";
    return kAllDiverged;
  } catch (const std::exception& e) {
    std::cerr << "dblms: " << e.what() << "\n";
    return kFailure;
  }
}
