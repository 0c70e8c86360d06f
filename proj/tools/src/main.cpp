#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

unsigned env_threads() {
  const char* v = std::getenv("KOOPID_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  return (end && *end == '\0') ? static_cast<unsigned>(n) : 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"koopid: Koopman system identification from time series"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string model, data, out;
  unsigned threads = 0;

  struct Spec {
    const char* name;
    const char* help;
    bool model;
    bool data;
  };
  const Spec specs[] = {
      {"simulate", "Simulate a reference system and write series.csv", false, false},
      {"fit", "Fit a model to a dataset and write model.kpa", false, true},
      {"predict", "Roll a fitted model forward against a dataset", true, true},
      {"analyze", "Basins, limit cycle, PRC, fixed point or spectrum of a model", true, true},
  };
  for (const Spec& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("-c,--config", config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("-o,--out", out, "Output directory (default: [output] directory)");
    sub->add_option("-t,--threads", threads, "Worker threads (0: KOOPID_THREADS or all cores)");
    if (s.model) sub->add_option("-m,--model", model, "Model archive (.kpa)")->check(CLI::ExistingFile);
    if (s.data) sub->add_option("-d,--data", data, "Dataset CSV")->check(CLI::ExistingFile);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return koopid::cli::kExitUsage;
  }

  koopid::cli::CommandPaths paths;
  if (!model.empty()) paths.model = model;
  if (!data.empty()) paths.data = data;
  paths.out = out;  // empty: take it from the config
  paths.threads = threads ? threads : env_threads();

  const std::string name = app.get_subcommands().front()->get_name();
  return koopid::cli::run_command(name, config, seed, paths, std::cout, std::cerr);
}
