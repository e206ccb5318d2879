#pragma once

#include <Eigen/Dense>
#include <functional>

#include "mfabsde/kernel.hpp"
#include "mfabsde/paths.hpp"

namespace mfabsde {

// Gaussian driver eta_t = eta0 + int b ds + int sigma dB.
struct EtaSpec {
  double eta0 = 0.0;
  Tabulation b;
  Tabulation sigma;  // single-signed, nonvanishing on (0, T]
};

void validate_eta(const EtaSpec& spec, const TimeGrid& grid);

// eta driven by an exact fBm ensemble (left-endpoint sums, matching
// wiener_integral cell by cell).
PathEnsemble simulate_eta(const EtaSpec& spec, const PathEnsemble& fbm,
                          Exec exec = default_exec());

// Gaussian ensemble with the same nodewise marginals as eta (mean
// eta0 + int b, variance ||sigma||^2_t) but independent increments of
// variance gamma_{i+1} - gamma_i. This is the regression ensemble of the
// backward solver: under the quasi-conditional expectation the driver
// noise acts like an independent-increment process, whereas raw fBm
// conditioning would leak the memory of the past into every projection.
PathEnsemble markov_eta_ensemble(const EtaSpec& spec,
                                 const KernelMatrix& kernel, int N,
                                 std::uint64_t seed,
                                 Exec exec = default_exec());

// Controlled mean-field state with scalar-moment drift:
// drift(t, E[psi1(X_t)], E[psi2(X_{t-delta})], E[psi3(u_t)]).
struct StateSpec {
  std::function<double(double, double, double, double)> drift;
  std::function<double(double)> psi1, psi2, psi3;
  Tabulation vol;
  std::function<double(double)> x0;  // initial path on [-delta, 0]
  double delta = 0.0;
};

// Euler scheme driven by the fbm ensemble; laws enter through ensemble
// moments recomputed at every step. control is particle x node (use
// constant_control for deterministic controls). The returned ensemble
// lives on the unextended grid [0, T] with the same step as fbm.
PathEnsemble simulate_state(const StateSpec& spec,
                            const Eigen::MatrixXd& control,
                            const PathEnsemble& fbm,
                            Exec exec = default_exec());

Eigen::MatrixXd constant_control(double c, int N, const TimeGrid& grid);

// Method-of-steps Euler solution of m'(t) = -beta1(t) m(t - delta) +
// extra(t) with m = x0 on [-delta, 0]; values on nodes 0..horizon_index.
Tabulation mean_delay_ode(const Tabulation& beta1, const Tabulation& extra,
                          const std::function<double(double)>& x0,
                          double delta, const TimeGrid& grid);

}  // namespace mfabsde
