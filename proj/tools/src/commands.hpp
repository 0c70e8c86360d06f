#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "config.hpp"

namespace koopid::cli {

struct CommandPaths {
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = ".";
  unsigned threads = 0;  // 0: KOOPID_THREADS or hardware concurrency
};

/// series.csv plus a series.json manifest.
void cmd_simulate(const RunConfig& config, const CommandPaths& paths, std::ostream& log);
/// model.kpa; prints the training residual and a dims table.
void cmd_fit(const RunConfig& config, const CommandPaths& paths, std::ostream& log);
/// prediction.csv and error.csv. Throws NumericalError after writing the
/// partial outputs when the rollout diverges.
void cmd_predict(const RunConfig& config, const CommandPaths& paths, std::ostream& log);
/// Result tables for [analysis] task.
void cmd_analyze(const RunConfig& config, const CommandPaths& paths, std::ostream& log);

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Runs a subcommand and maps exceptions to exit codes, reporting errors on `err`.
int run_command(const std::string& name, const std::filesystem::path& config_path,
                std::optional<std::uint64_t> seed, const CommandPaths& paths, std::ostream& log,
                std::ostream& err);

} // namespace koopid::cli
