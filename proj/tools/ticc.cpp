// ticc: run one configured experiment and write its artifacts.
//
//   ticc <experiment> --config cfg.json [--out DIR] [--seed N] [--threads N]
//
// Exit codes: 0 success, 2 invalid config or arguments, 3 computation failure.

#include <CLI11.hpp>

#include <iostream>

#include "ticc/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCompute = 3;

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

int run(const std::string& experiment, const Args& a) {
  try {
    ticc::ExperimentConfig c = ticc::loadConfig(a.config);
    if (c.experiment != experiment)
      throw ticc::ConfigError("experiment", "config is for '" + c.experiment + "', not '" + experiment + "'");
    if (a.seed) c.seed = *a.seed;
    if (!a.out.empty()) c.output = a.out;
    ticc::runExperiment(c, c.output, a.threads);
    std::cout << "wrote " << c.output << " (config " << ticc::configHash(c) << ")\n";
    return 0;
  } catch (const ticc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compile circuits against infinite tensor network targets"};
  app.set_version_flag("--version", std::string("ticc ") + ticc::kToolVersion);
  app.require_subcommand(1);

  Args args;
  std::string chosen;
  for (const auto& name : ticc::experimentNames()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (overrides the config)");
    sub->add_option("--seed", args.seed, "base seed (overrides the config)");
    sub->add_option("--threads", args.threads, "worker threads")->check(CLI::Range(1, 1024));
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(chosen, args);
}
