#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mfabsde/experiments.hpp"

namespace {

int print_results(const std::vector<mfabsde::CriterionResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    std::printf("[%s] %s  (value %.6g, threshold %.6g) %s\n",
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.value,
                r.threshold, r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

mfabsde::ExperimentConfig make_config(const std::string& experiment,
                                      const std::string& config_path) {
  if (!config_path.empty()) {
    mfabsde::ExperimentConfig cfg = mfabsde::load_config(config_path);
    if (!experiment.empty() && experiment != cfg.experiment)
      throw std::runtime_error(
          "experiment on the command line (" + experiment +
          ") disagrees with the config file (" + cfg.experiment + ")");
    return cfg;
  }
  if (experiment.empty())
    throw std::runtime_error("no experiment given (name or --config)");
  return mfabsde::default_config(experiment);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfabsde: mean-field anticipated BSDEs driven by fractional "
               "Brownian motion"};
  app.require_subcommand(1);

  std::string experiment, config_path, output_dir;
  int workers = -1, N = -1;
  std::int64_t seed = -1;

  CLI::App* run = app.add_subcommand("run", "run an experiment");
  run->add_option("experiment", experiment, "experiment name");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--output-dir", output_dir, "results directory");
  run->add_option("--workers", workers, "worker threads (0 = hardware)");
  run->add_option("--particles", N, "ensemble size override");
  run->add_option("--seed", seed, "seed override");

  CLI::App* val = app.add_subcommand("validate", "validate a config file");
  val->add_option("config", config_path, "JSON config file")->required();

  CLI::App* list =
      app.add_subcommand("list-experiments", "list experiment names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      for (const auto& name : mfabsde::experiment_names())
        std::printf("%s\n", name.c_str());
      return 0;
    }
    if (val->parsed()) {
      mfabsde::ExperimentConfig cfg = mfabsde::load_config(config_path);
      std::printf("ok: %s\n", cfg.experiment.c_str());
      return 0;
    }
    mfabsde::ExperimentConfig cfg = make_config(experiment, config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (workers >= 0) cfg.workers = workers;
    if (N > 0) cfg.N = N;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    return print_results(mfabsde::run_experiment(cfg));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
