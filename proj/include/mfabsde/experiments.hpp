#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mfabsde {

struct CriterionResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // the measured quantity
  double threshold = 0.0;  // what it is compared against
  std::string detail;
};

struct ExperimentConfig {
  std::string experiment;
  double H = 0.75;
  double T = 1.0;
  double K = 0.0;
  double dt = 1.0 / 64.0;
  int N = 20000;
  int degree = 2;
  int picard_max = 25;
  double tol = 1e-6;
  double beta = -1.0;
  std::uint64_t seed = 20240817;
  int workers = 0;  // 0: library default; must not change results
  std::string output_dir = "results";
};

const std::vector<std::string>& experiment_names();

ExperimentConfig default_config(const std::string& experiment);

// Structured JSON config file; unknown keys rejected, values validated.
ExperimentConfig load_config(const std::string& path);

// output_dir, overridden by the MFABSDE_OUTPUT_DIR environment variable.
std::string resolve_output_dir(const ExperimentConfig& cfg);

// Runs the experiment, writes manifest + CSV artifacts + summary under
// <output dir>/<experiment>/, and returns the per-criterion results.
std::vector<CriterionResult> run_experiment(const ExperimentConfig& cfg);

}  // namespace mfabsde
