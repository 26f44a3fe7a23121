#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sacpde/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sequential action control for the unstable 1-D heat equation"};
  app.set_version_flag("--version", std::string(sacpde::kToolVersion));
  app.require_subcommand(1, 1);

  sacpde::CommandOptions options;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "Scenario file (INI); defaults if omitted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", output_dir, "Directory for CSV, report and manifest files");
    cmd->add_option("--seed", seed, "Overrides disturbance.seed");
    cmd->add_flag("--quiet", options.quiet, "Suppress progress output");
  };

  const char* commands[][2] = {
      {"simulate", "Run the SAC closed loop and write error, cost, control and state CSVs"},
      {"sweep", "Run the [sweep] values of the scenario and write one series per value"},
      {"compare", "Run SAC and LQR on the same plant and disturbance"},
      {"analyze", "Report modal closed-loop rates and the stability threshold"},
      {"gradient_check", "Compare the mode insertion gradient with finite differences"},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c[0], c[1]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  options.output_dir = output_dir;
  if (chosen->count("--seed") > 0) options.seed = seed;
  return sacpde::run_command(chosen->get_name(), options, std::cout, std::cerr);
}
