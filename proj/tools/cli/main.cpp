#include <iostream>

#include <CLI11.hpp>

#include "harness/commands.hpp"

int main(int argc, char** argv) {
  using namespace torsionlab::harness;

  CLI::App app{"Torsion-balance Casimir experiment simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  CommandOptions options;
  std::string config, out, input, format = "json";
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Scenario file (unit-suffixed key = value)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override run.seed");
    sub->add_option("--out", out, "Output directory (overrides run.output_dir)");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  };

  struct Entry {
    const char* name;
    const char* help;
    bool takes_input;
  };
  const Entry entries[] = {
      {"simulate", "Closed-loop null measurement under a constant force", false},
      {"calibrate", "Electrostatic calibration: d0, beta, and the V0 profile", true},
      {"budget", "Sensitivity and noise budget", false},
      {"michelson", "Interferometric PZT gain calibration", true},
      {"sweep", "Null measurements over a list of applied forces", false},
  };
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    if (e.takes_input) {
      sub->add_option("--input", input, "Measured data CSV instead of a simulated run")
          ->check(CLI::ExistingFile);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitIo;
  }

  auto* sub = app.get_subcommands().front();
  if (!config.empty()) options.config = config;
  if (sub->count("--seed")) options.seed = seed;
  if (!out.empty()) options.out = out;
  if (!input.empty()) options.input = input;
  options.format = format == "csv" ? OutputFormat::kCsv : OutputFormat::kJson;

  return run_command(sub->get_name(), options, std::cout, std::cerr);
}
