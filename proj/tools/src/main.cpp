#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <map>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "sta/errors.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  bool assert_mode = false;
  int threads = 0;
  double dt_scale = 1.0;
};

int run(const std::string& command, const Flags& flags) {
  using namespace sta::cli;
  const RunConfig config = load_config(flags.config);
  CommandOptions options;
  options.out_dir = flags.out.empty() ? std::filesystem::path(config.output_dir) : std::filesystem::path(flags.out);
  options.assert_mode = flags.assert_mode;
  options.threads = resolve_thread_request(flags.threads);
  options.dt_scale = flags.dt_scale;
  options.log = &std::cerr;
  const CommandResult result = run_command(command, config, options);
  for (const auto& file : result.files) std::cout << file.string() << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shortcut-to-adiabaticity trap expansion toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "Output directory (default: output.dir of the config)");
  app.add_flag("--assert", flags.assert_mode, "Exit non-zero when an acceptance threshold is missed");
  app.add_option("--threads", flags.threads, "Worker threads (default: STA_TRAPKIT_THREADS, else all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--dt-scale", flags.dt_scale, "Multiplier on every default integration step")
      ->check(CLI::PositiveNumber);

  std::string command;
  const std::map<std::string, std::string> blurbs{
      {"design", "Write the omega^2(t) schedule, b(t) and a design report"},
      {"propagate", "Propagate a Gaussian state through the schedule and score it"},
      {"fidelity-sweep", "Fidelity against the adiabatic target over protocols and t_f"},
      {"optimize", "Add polynomial coefficients to lower the peak slew rate"},
      {"simulate", "Classical ion trajectories through RF / shortcut / RF"},
      {"cycle-report", "Energy bookkeeping of a refrigeration cycle built from two shortcuts"}};
  for (const auto& name : sta::cli::command_names()) {
    const auto it = blurbs.find(name);
    app.add_subcommand(name, it == blurbs.end() ? std::string{} : it->second)
        ->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sta::cli::kExitConfig;
  }

  try {
    return run(command, flags);
  } catch (const sta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sta::cli::kExitConfig;
  } catch (const sta::PhysicsError& e) {
    std::cerr << "physics failure: " << e.what() << '\n';
    return sta::cli::kExitPhysics;
  } catch (const sta::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return sta::cli::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sta::cli::kExitNumerical;
  }
}
