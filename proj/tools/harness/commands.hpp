#pragma once

// Subcommand implementations shared by the CLI and the tests.
//
// Exit codes:
//   0  success
//   1  usage or I/O failure
//   2  configuration, schema, or domain error
//   3  numerical or fit failure
//   4  closed-loop instability

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "harness/scenario.hpp"

namespace torsionlab::harness {

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitInstability = 4,
};

enum class OutputFormat { kJson, kCsv };

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> input;
  OutputFormat format = OutputFormat::kJson;
};

/// Scenario from --config (or defaults) with --seed and --out applied.
Scenario resolve_scenario(const CommandOptions& options);

/// Runs `command` ("simulate", "calibrate", "budget", "michelson", "sweep"),
/// writes artifacts plus manifest.json into the output directory, prints a
/// short report to `out` and diagnostics to `err`, and returns the exit code.
/// Artifacts written before a failure are kept and listed in the manifest.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

std::string_view tool_version();

}  // namespace torsionlab::harness
