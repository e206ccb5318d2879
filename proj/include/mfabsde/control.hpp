#pragma once

#include <functional>
#include <vector>

#include "mfabsde/comparison.hpp"
#include "mfabsde/forward.hpp"
#include "mfabsde/solver.hpp"

namespace mfabsde {

// Control problem with scalar-moment measure dependence:
//   dX = b_hat(t, s1, s2, s3) dt + sigma(t) dB,  s1 = E[psi1(X_t)],
//   s2 = E[psi2(X_{t-delta})], s3 = E[psi3(u_t)];
//   J = E[ g_hat(X_T, r3) + int_0^T f_hat(t, X_t, E[X_t], r1, r2, u_t) dt ],
//   r1 = E[gamma1(X_t)], r2 = E[gamma2(X_{t-delta})], r3 = E[gamma3(X_T)].
struct ControlProblemSpec {
  std::function<double(double, double, double, double)> b_hat;
  std::function<double(double, double, double, double)> db_s1, db_s2, db_s3;

  std::function<double(double, double, double, double, double, double)> f_hat;
  std::function<double(double, double, double, double, double, double)> df_x,
      df_xbar, df_r1, df_r2, df_u;

  std::function<double(double, double)> g_hat;  // (x, r3)
  std::function<double(double, double)> dg_x, dg_r3;

  std::function<double(double)> psi1, psi2, psi3;
  std::function<double(double)> dpsi1, dpsi2, dpsi3;
  std::function<double(double)> gamma1, gamma2, gamma3;
  std::function<double(double)> dgamma1, dgamma2, dgamma3;

  Tabulation sigma;
  double delta = 0.0;
  double u_min = -1.0, u_max = 1.0;
  double adjoint_lipschitz = -1.0;  // < 0: derived from |db_s*| maxima
};

struct HamiltonianArgs {
  double t = 0.0, x = 0.0, xbar = 0.0, u = 0.0;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  double r1 = 0.0, r2 = 0.0;
  double y = 0.0, z = 0.0;
};

double hamiltonian(const HamiltonianArgs& a, const ControlProblemSpec& spec,
                   const TimeGrid& grid);

struct HamiltonianDerivs {
  double dx = 0.0, dxbar = 0.0, du = 0.0;
  std::function<double(double)> dm1, dm2, dm3;  // measure derivatives at v
};

HamiltonianDerivs hamiltonian_derivatives(const HamiltonianArgs& a,
                                          const ControlProblemSpec& spec,
                                          const TimeGrid& grid);

// The adjoint MF-ABSDE assembled for a given state/control ensemble pair.
// The solver ensemble represents X(t) as m(t) + eta_t with m the ensemble
// mean path (valid because the drift is law-only).
struct AdjointAssembly {
  GeneratorSpec gen;
  TerminalSpec terminal;
  EtaSpec eta_spec;     // eta0 = 0, b = 0, sigma from the problem
  Tabulation mean_path; // m(t) on the extended grid (frozen at m(T) past T)
  DelaySpec delays;
};

AdjointAssembly build_adjoint(const ControlProblemSpec& spec,
                              const PathEnsemble& state,
                              const Eigen::MatrixXd& control,
                              const TimeGrid& grid);

// Interval-by-interval backward solve for adjoints whose anticipation
// enters only through plain expectations: one Gauss-Seidel sweep where
// anticipated means are read from already-computed future nodes. Falls
// back to picard_solve (with a warning on stderr) otherwise.
SolutionField solve_adjoint_stepwise(const AdjointAssembly& assembly,
                                     const PathEnsemble& eta,
                                     const KernelMatrix& kernel,
                                     const SolverConfig& cfg);

struct PerformanceEstimate {
  double value = 0.0;
  double se = 0.0;
};

PerformanceEstimate performance(const ControlProblemSpec& spec,
                                const PathEnsemble& state,
                                const Eigen::MatrixXd& control);

struct SufficientPrincipleReport {
  bool maximum_condition = false;   // H(u*) >= max over the control set
  double max_condition_gap = 0.0;
  bool law_condition = false;       // d/dm3 H at u* vanishes
  double law_condition_max = 0.0;
  bool concavity = false;           // secant test of H and g
  double concavity_worst = 0.0;
  bool optimality = false;          // J(u*) beats every challenger
  std::vector<double> challenger_margins;  // J(u*) - J(c) in combined SEs
};

SufficientPrincipleReport verify_sufficient_principle(
    const ControlProblemSpec& spec, const Eigen::MatrixXd& control,
    const PathEnsemble& state, const SolutionField& adjoint,
    const PathEnsemble& adjoint_eta, const Tabulation& mean_path,
    const std::vector<PerformanceEstimate>& challenger_performance,
    const PerformanceEstimate& candidate_performance);

}  // namespace mfabsde
