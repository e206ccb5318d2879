#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfabsde/comparison.hpp"
#include "mfabsde/forward.hpp"

using namespace mfabsde;

namespace {

struct Setup {
  TimeGrid grid;
  KernelMatrix kernel;
  EtaSpec espec;
  PathEnsemble eta;
  DelaySpec delays;
};

Setup make_setup(int N) {
  TimeGrid grid(1.0, 0.25, 1.0 / 16.0);
  KernelMatrix kernel(grid, HurstParameter(0.75));
  EtaSpec espec{0.0, Tabulation(grid.node_count(), 0.0),
                Tabulation(grid.node_count(), 1.0)};
  PathEnsemble eta = markov_eta_ensemble(espec, kernel, N, 201);
  return {grid, kernel, espec, std::move(eta),
          constant_delays(0.25, 0.25)};
}

ComparisonCase make_case(double gap) {
  ComparisonCase c;
  c.gen1.f = [](const DriverArgs& a) { return a.y + a.y_shift_mean; };
  c.gen2.f = [gap](const DriverArgs& a) {
    return a.y + a.y_shift_mean + gap;
  };
  c.gen1.uses = c.gen2.uses = UsesY | UsesYShiftMean;
  c.gen1.cls = c.gen2.cls = GeneratorClass::MeanFieldAnticipated;
  c.gen1.lipschitz_C = c.gen2.lipschitz_C = 1.0;
  c.gen1_increasing_in_shift_mean = true;
  c.terminal1 = {[](double x) { return x * x / (1.0 + x * x); },
                 [](double) { return 0.0; }};
  c.terminal2 = c.terminal1;
  return c;
}

}  // namespace

TEST_CASE("identical data gives identical solutions and no violations") {
  Setup s = make_setup(1500);
  ComparisonCase c = make_case(0.0);
  OrderingReport rep = solve_ordered_pair(c, s.eta, s.espec.sigma, s.kernel,
                                          s.delays, SolverConfig{});
  CHECK(rep.pass);
  for (double v : rep.violation_fraction) CHECK(v == 0.0);
  CHECK((rep.field1.Y - rep.field2.Y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ordered drivers give ordered solutions") {
  Setup s = make_setup(1500);
  ComparisonCase c = make_case(0.5);
  OrderingReport rep = solve_ordered_pair(c, s.eta, s.espec.sigma, s.kernel,
                                          s.delays, SolverConfig{});
  CHECK(rep.pass);
  // the gap in the driver produces a strictly larger solution
  CHECK(rep.field2.Y.col(0).mean() > rep.field1.Y.col(0).mean() + 0.1);
}

TEST_CASE("misordered drivers are rejected by the spot check") {
  Setup s = make_setup(300);
  ComparisonCase c = make_case(-0.5);
  CHECK_THROWS_AS(solve_ordered_pair(c, s.eta, s.espec.sigma, s.kernel,
                                     s.delays, SolverConfig{}),
                  std::invalid_argument);
}

TEST_CASE("undeclared monotonicity is rejected") {
  Setup s = make_setup(300);
  ComparisonCase c = make_case(0.5);
  c.gen1_increasing_in_shift_mean = false;
  CHECK_THROWS_AS(monotone_sequence(c, s.eta, s.espec.sigma, s.kernel,
                                    s.delays, SolverConfig{}, 2),
                  std::invalid_argument);
}

TEST_CASE("monotone scheme stabilizes immediately when gen1 ignores the "
          "anticipated mean") {
  Setup s = make_setup(1000);
  ComparisonCase c = make_case(0.5);
  c.gen1.f = [](const DriverArgs& a) { return a.y; };
  c.gen1.uses = UsesY;
  c.gen1.cls = GeneratorClass::MeanFieldAnticipated;  // declared superset
  c.gen1_increasing_in_shift_mean = true;  // weakly increasing
  MonotoneReport rep = monotone_sequence(c, s.eta, s.espec.sigma, s.kernel,
                                         s.delays, SolverConfig{}, 3);
  CHECK(rep.monotone);
  // after the first step the frozen mean no longer matters
  CHECK(rep.dist_to_limit[1] < 1e-9);
  CHECK(rep.dist_to_limit[2] < 1e-9);
}

TEST_CASE("monotone scheme decreases towards the limit") {
  Setup s = make_setup(1000);
  ComparisonCase c = make_case(0.5);
  MonotoneReport rep = monotone_sequence(c, s.eta, s.espec.sigma, s.kernel,
                                         s.delays, SolverConfig{}, 4);
  CHECK(rep.monotone);
  CHECK(rep.dist_to_limit.back() < rep.dist_to_limit.front());
}
