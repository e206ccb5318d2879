// Timing comparison of the serial reference implementation against the
// OpenMP execution path for the main kernels.
#include <chrono>
#include <cstdio>

#include "mfabsde/forward.hpp"
#include "mfabsde/kernel.hpp"
#include "mfabsde/parallel.hpp"
#include "mfabsde/paths.hpp"
#include "mfabsde/solver.hpp"

using namespace mfabsde;

namespace {

template <typename F>
double time_ms(F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  body();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-24s %10.1f ms %10.1f ms    %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  const double H = 0.75;
  TimeGrid grid(1.0, 0.0, 1.0 / 128.0);
  const int N = 40000;

  std::printf("%-24s %13s %13s %8s\n", "kernel", "serial", "openmp",
              "speedup");

  double s = time_ms([&] {
    set_default_exec(Exec::Serial);
    KernelMatrix k(grid, HurstParameter(H));
    (void)k;
  });
  double p = time_ms([&] {
    set_default_exec(Exec::OpenMP);
    KernelMatrix k(grid, HurstParameter(H));
    (void)k;
  });
  report("kernel assembly", s, p);

  KernelMatrix kernel(grid, HurstParameter(H));
  s = time_ms([&] { sample_fbm(kernel, N, 1, Exec::Serial); });
  p = time_ms([&] { sample_fbm(kernel, N, 1, Exec::OpenMP); });
  report("fbm sampling", s, p);

  EtaSpec espec{0.0, Tabulation(grid.node_count(), 1.0),
                Tabulation(grid.node_count(), 1.0)};
  PathEnsemble eta = markov_eta_ensemble(espec, kernel, N, 1);
  GeneratorSpec gen;
  gen.f = [](const DriverArgs&) { return -1.0; };
  TerminalSpec term{[](double x) { return x; }, [](double) { return 1.0; }};
  auto solve_with = [&](Exec exec) {
    SolverConfig cfg;
    cfg.exec = exec;
    picard_solve(gen, term, eta, espec.sigma, kernel,
                 constant_delays(0.0, 0.0), cfg);
  };
  s = time_ms([&] { solve_with(Exec::Serial); });
  p = time_ms([&] { solve_with(Exec::OpenMP); });
  report("backward solve", s, p);
  return 0;
}
