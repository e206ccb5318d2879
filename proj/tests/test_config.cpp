#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "mfabsde/experiments.hpp"
#include "mfabsde/time_grid.hpp"

using namespace mfabsde;

namespace {
std::string write_tmp(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/mfabsde-test-" + name + ".json";
  std::ofstream out(path);
  out << body;
  return path;
}
}  // namespace

TEST_CASE("defaults exist for every experiment") {
  for (const std::string& name : experiment_names()) {
    ExperimentConfig cfg = default_config(name);
    CHECK(cfg.experiment == name);
    CHECK(cfg.N >= 1);
  }
  CHECK_THROWS_AS((void)default_config("nope"), std::invalid_argument);
}

TEST_CASE("config files are parsed and overrides applied") {
  const std::string path = write_tmp(
      "ok",
      R"({"experiment": "ito-check", "N": 123, "dt": 0.125, "seed": 7})");
  ExperimentConfig cfg = load_config(path);
  CHECK(cfg.experiment == "ito-check");
  CHECK(cfg.N == 123);
  CHECK(cfg.dt == 0.125);
  CHECK(cfg.seed == 7);
  CHECK(cfg.H == 0.75);  // untouched default
}

TEST_CASE("unknown keys are rejected") {
  const std::string path = write_tmp(
      "unknown", R"({"experiment": "ito-check", "particles": 10})");
  CHECK_THROWS_WITH_AS(load_config(path),
                       doctest::Contains("unknown key \"particles\""),
                       std::runtime_error);
}

TEST_CASE("hurst validation message") {
  const std::string path =
      write_tmp("hurst", R"({"experiment": "ito-check", "H": 0.5})");
  CHECK_THROWS_WITH_AS(load_config(path),
                       doctest::Contains("H must lie in (1/2, 1)"),
                       std::invalid_argument);
}

TEST_CASE("malformed json and missing files fail cleanly") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"),
                  std::runtime_error);
  const std::string path = write_tmp("bad", "{not json");
  CHECK_THROWS_AS(load_config(path), std::runtime_error);
}

TEST_CASE("grid misalignment is rejected") {
  const std::string path = write_tmp(
      "misaligned", R"({"experiment": "ito-check", "T": 1.0, "dt": 0.3})");
  CHECK_THROWS(load_config(path));
}

TEST_CASE("output dir environment override") {
  ExperimentConfig cfg = default_config("ito-check");
  cfg.output_dir = "from-config";
  unsetenv("MFABSDE_OUTPUT_DIR");
  CHECK(resolve_output_dir(cfg) == "from-config");
  setenv("MFABSDE_OUTPUT_DIR", "/tmp/from-env", 1);
  CHECK(resolve_output_dir(cfg) == "/tmp/from-env");
  unsetenv("MFABSDE_OUTPUT_DIR");
}

TEST_CASE("delay validation flags non-aligned shifts") {
  TimeGrid grid(1.0, 0.25, 1.0 / 16.0);
  DelayValidation ok = validate_delays(constant_delays(0.25, 0.25), grid);
  CHECK_FALSE(ok.rounding_warning);
  DelayValidation warn = validate_delays(constant_delays(0.2, 0.2), grid);
  CHECK(warn.rounding_warning);
}
