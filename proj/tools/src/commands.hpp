#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "config.hpp"

namespace sta::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitPhysics = 3,
  kExitNumerical = 4,
};

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  /// Turn acceptance thresholds into a physics-failure exit code.
  bool assert_mode = false;
  /// Worker threads for sweeps and ensembles (0: hardware concurrency).
  unsigned threads = 1;
  /// Multiplies every default integration step.
  double dt_scale = 1.0;
  /// Progress, warnings and assertion messages.
  std::ostream* log = nullptr;
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
  nlohmann::json report;
  /// Assertion failures and warnings, in the order they were found.
  std::vector<std::string> messages;
};

CommandResult cmd_design(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_propagate(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_fidelity_sweep(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_optimize(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_simulate(const RunConfig& config, const CommandOptions& options);
CommandResult cmd_cycle_report(const RunConfig& config, const CommandOptions& options);

/// Names accepted by run_command, in display order.
const std::vector<std::string>& command_names();

/// Dispatches by subcommand name; throws ConfigError for unknown names.
CommandResult run_command(std::string_view name, const RunConfig& config, const CommandOptions& options);

/// Thread count from --threads (if > 0), else STA_TRAPKIT_THREADS, else 0.
unsigned resolve_thread_request(int flag_value);

}  // namespace sta::cli
