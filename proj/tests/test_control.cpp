#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfabsde/control.hpp"
#include "mfabsde/forward.hpp"

using namespace mfabsde;

namespace {

// the linear-quadratic test problem used throughout:
// drift -b1 E[X(t-d)] - b2 E[u]^2, running cost -u^2/2, terminal -x^2/2
ControlProblemSpec make_lq(int nodes, double delta) {
  const double b1 = 0.5, b2 = 1.0;
  ControlProblemSpec spec;
  spec.b_hat = [b1, b2](double, double, double s2, double s3) {
    return -b1 * s2 - b2 * s3 * s3;
  };
  spec.db_s1 = [](double, double, double, double) { return 0.0; };
  spec.db_s2 = [b1](double, double, double, double) { return -b1; };
  spec.db_s3 = [b2](double, double, double, double s3) {
    return -2.0 * b2 * s3;
  };
  auto zero6 = [](double, double, double, double, double, double) {
    return 0.0;
  };
  spec.f_hat = [](double, double, double, double, double, double u) {
    return -0.5 * u * u;
  };
  spec.df_x = spec.df_xbar = spec.df_r1 = spec.df_r2 = zero6;
  spec.df_u = [](double, double, double, double, double, double u) {
    return -u;
  };
  spec.g_hat = [](double x, double) { return -0.5 * x * x; };
  spec.dg_x = [](double x, double) { return -x; };
  spec.dg_r3 = [](double, double) { return 0.0; };
  auto id = [](double v) { return v; };
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  spec.psi1 = spec.psi2 = spec.psi3 = id;
  spec.dpsi1 = spec.dpsi2 = spec.dpsi3 = one;
  spec.gamma1 = spec.gamma2 = spec.gamma3 = zero;
  spec.dgamma1 = spec.dgamma2 = spec.dgamma3 = zero;
  spec.sigma = Tabulation(nodes, 1.0);
  spec.delta = delta;
  spec.u_min = -2.0;
  spec.u_max = 2.0;
  return spec;
}

}  // namespace

TEST_CASE("hamiltonian value and derivatives for the LQ problem") {
  TimeGrid grid(1.0, 0.25, 1.0 / 16.0);
  ControlProblemSpec spec = make_lq(grid.node_count(), 0.25);
  HamiltonianArgs a;
  a.t = 0.5;
  a.x = 0.3;
  a.u = 0.7;
  a.s2 = 1.1;
  a.s3 = 0.7;
  a.y = 2.0;
  a.z = -1.0;
  // H = -u^2/2 + y (-b1 s2 - b2 s3^2) + z sigma
  const double target =
      -0.5 * 0.49 + 2.0 * (-0.5 * 1.1 - 0.49) + (-1.0) * 1.0;
  CHECK(hamiltonian(a, spec, grid) == doctest::Approx(target));

  HamiltonianDerivs d = hamiltonian_derivatives(a, spec, grid);
  CHECK(d.du == doctest::Approx(-0.7));
  CHECK(d.dx == doctest::Approx(0.0));
  CHECK(d.dm2(0.4) == doctest::Approx(2.0 * (-0.5)));
  CHECK(d.dm3(0.4) == doctest::Approx(2.0 * (-2.0 * 0.7)));

  // finite-difference check in u
  HamiltonianArgs ap = a, am = a;
  ap.u += 1e-5;
  am.u -= 1e-5;
  const double fd =
      (hamiltonian(ap, spec, grid) - hamiltonian(am, spec, grid)) / 2e-5;
  CHECK(d.du == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("performance of a constant control matches the closed form") {
  TimeGrid grid(1.0, 0.0, 1.0 / 32.0);
  ControlProblemSpec spec = make_lq(grid.node_count(), 0.25);
  spec.g_hat = [](double, double) { return 0.0; };
  spec.dg_x = [](double, double) { return 0.0; };
  KernelMatrix kernel(grid, HurstParameter(0.75));
  PathEnsemble fbm = sample_fbm(kernel, 50, 301);
  StateSpec sspec{spec.b_hat,
                  [](double v) { return v; },
                  [](double v) { return v; },
                  [](double v) { return v; },
                  Tabulation(grid.node_count(), 1.0),
                  [](double) { return 0.0; },
                  0.25};
  const double c = 1.5;
  Eigen::MatrixXd u = constant_control(c, 50, grid);
  PathEnsemble x = simulate_state(sspec, u, fbm);
  PerformanceEstimate j = performance(spec, x, u);
  // running cost only: J = -c^2 T / 2, deterministic
  CHECK(j.value == doctest::Approx(-0.5 * c * c).epsilon(1e-10));
  CHECK(j.se < 1e-12);
}

TEST_CASE("adjoint assembly for the LQ problem") {
  TimeGrid sgrid(1.0, 0.0, 1.0 / 16.0);
  TimeGrid egrid(1.0, 0.25, 1.0 / 16.0);
  ControlProblemSpec spec = make_lq(egrid.node_count(), 0.25);
  KernelMatrix kernel(sgrid, HurstParameter(0.75));
  PathEnsemble fbm = sample_fbm(kernel, 400, 303);
  StateSpec sspec{spec.b_hat,
                  [](double v) { return v; },
                  [](double v) { return v; },
                  [](double v) { return v; },
                  Tabulation(sgrid.node_count(), 1.0),
                  [](double) { return 0.0; },
                  0.25};
  Eigen::MatrixXd u = constant_control(0.0, 400, sgrid);
  PathEnsemble state = simulate_state(sspec, u, fbm);
  AdjointAssembly asmb = build_adjoint(spec, state, u, egrid);

  // only the delayed law coupling survives: uses = X-part + shifted mean
  CHECK((asmb.gen.uses & UsesYShiftMean) != 0);
  CHECK((asmb.gen.uses & UsesYMean) == 0);
  CHECK(asmb.delays.delta(0.0) == doctest::Approx(0.25));

  // driver is -db_s2 * E[Y(t+d)] = 0.5... with the sign convention
  // -dY = D dt - Z dB the coefficient is -beta1 E[Y(t+d)]
  DriverArgs a;
  a.node = 2;
  a.t = egrid.time(2);
  a.y_shift_mean = 3.0;
  CHECK(asmb.gen.f(a) == doctest::Approx(-0.5 * 3.0));
  // past the horizon minus delay the anticipated block is absent
  a.node = sgrid.horizon_index() - 2;
  a.t = egrid.time(a.node);
  CHECK(asmb.gen.f(a) == doctest::Approx(0.0));

  // terminal: -(m(T) + eta), and h is its sigma-weighted derivative
  const double mT = asmb.mean_path[egrid.horizon_index()];
  CHECK(asmb.terminal.g(0.3) == doctest::Approx(-(mT + 0.3)));
  CHECK(asmb.terminal.h(0.3) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("stepwise adjoint solve agrees with picard on one interval") {
  // T <= delta: the anticipated block never activates, both solvers
  // reduce to the same plain backward equation
  TimeGrid sgrid(0.25, 0.0, 1.0 / 16.0);
  TimeGrid egrid(0.25, 0.25, 1.0 / 16.0);
  ControlProblemSpec spec = make_lq(egrid.node_count(), 0.25);
  KernelMatrix skernel(sgrid, HurstParameter(0.75));
  KernelMatrix ekernel(egrid, HurstParameter(0.75));
  PathEnsemble fbm = sample_fbm(skernel, 2000, 305);
  StateSpec sspec{spec.b_hat,
                  [](double v) { return v; },
                  [](double v) { return v; },
                  [](double v) { return v; },
                  Tabulation(sgrid.node_count(), 1.0),
                  [](double) { return 0.0; },
                  0.25};
  Eigen::MatrixXd u = constant_control(0.0, 2000, sgrid);
  PathEnsemble state = simulate_state(sspec, u, fbm);
  AdjointAssembly asmb = build_adjoint(spec, state, u, egrid);
  PathEnsemble eta = markov_eta_ensemble(asmb.eta_spec, ekernel, 2000, 307);
  SolverConfig cfg;
  cfg.degree = 1;
  SolutionField sw = solve_adjoint_stepwise(asmb, eta, ekernel, cfg);
  SolutionField pi = picard_solve(asmb.gen, asmb.terminal, eta,
                                  asmb.eta_spec.sigma, ekernel, asmb.delays,
                                  cfg);
  double dY = -1.0, dZ = -1.0;
  weighted_distance(sw, pi, 0.0, 1.5, &dY, &dZ);
  CHECK(dY + dZ < 1e-8);
}
