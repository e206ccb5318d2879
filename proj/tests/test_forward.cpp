#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfabsde/forward.hpp"

using namespace mfabsde;

TEST_CASE("eta with zero drift and unit volatility is the driving fbm") {
  KernelMatrix kernel{TimeGrid(1.0, 0.0, 1.0 / 32.0), HurstParameter(0.75)};
  PathEnsemble fbm = sample_fbm(kernel, 300, 17);
  EtaSpec spec{0.5, Tabulation(33, 0.0), Tabulation(33, 1.0)};
  PathEnsemble eta = simulate_eta(spec, fbm);
  CHECK(((eta.values.array() - fbm.values.array()) - 0.5)
            .abs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("eta validation rejects a sign-changing volatility") {
  TimeGrid grid(1.0, 0.0, 1.0 / 8.0);
  EtaSpec spec{0.0, Tabulation(9, 0.0), Tabulation(9, 1.0)};
  spec.sigma[5] = -1.0;
  CHECK_THROWS_AS(validate_eta(spec, grid), std::invalid_argument);
  spec.sigma[5] = 0.0;
  CHECK_THROWS_AS(validate_eta(spec, grid), std::invalid_argument);
}

TEST_CASE("markov surrogate matches the eta marginals") {
  TimeGrid grid(1.0, 0.0, 1.0 / 16.0);
  KernelMatrix kernel(grid, HurstParameter(0.75));
  EtaSpec spec{1.0, tabulate(grid, [](double t) { return t; }),
               Tabulation(grid.node_count(), 1.0)};
  const int N = 40000;
  PathEnsemble ens = markov_eta_ensemble(spec, kernel, N, 19);
  const auto gamma = kernel.norm_sq_profile(spec.sigma);
  for (int i : {4, 8, 16}) {
    const double t = grid.time(i);
    const Eigen::ArrayXd col = ens.values.col(i).array();
    const double mean = col.mean();
    const double var = (col - mean).square().mean();
    const double target_mean = 1.0 + 0.5 * t * t;
    CHECK(std::abs(mean - target_mean) <
          5.0 * std::sqrt(var / N) + 1e-2);  // drift is a left Riemann sum
    CHECK(std::abs(var - gamma[i]) <
          5.0 * gamma[i] * std::sqrt(2.0 / N));
  }
  // independent increments: adjacent increment correlation is small
  const Eigen::ArrayXd d1 =
      (ens.values.col(5) - ens.values.col(4)).array();
  const Eigen::ArrayXd d2 =
      (ens.values.col(6) - ens.values.col(5)).array();
  const double corr =
      ((d1 - d1.mean()) * (d2 - d2.mean())).mean() /
      std::sqrt((d1 - d1.mean()).square().mean() *
                (d2 - d2.mean()).square().mean());
  CHECK(std::abs(corr) < 5.0 / std::sqrt(double(N)));
}

TEST_CASE("state simulation with zero drift follows the noise") {
  KernelMatrix kernel{TimeGrid(1.0, 0.0, 1.0 / 32.0), HurstParameter(0.75)};
  PathEnsemble fbm = sample_fbm(kernel, 200, 23);
  StateSpec spec{[](double, double, double, double) { return 0.0; },
                 [](double v) { return v; },
                 [](double v) { return v; },
                 [](double v) { return v; },
                 Tabulation(33, 1.0),
                 [](double) { return 0.25; },
                 0.25};
  Eigen::MatrixXd u = constant_control(0.0, 200, fbm.grid);
  PathEnsemble x = simulate_state(spec, u, fbm);
  CHECK(x.grid.horizon() == doctest::Approx(1.0));
  CHECK(((x.values.array() - fbm.values.array()) - 0.25).abs().maxCoeff() <
        1e-12);
}

TEST_CASE("mean delay ode against closed forms") {
  TimeGrid grid(1.0, 0.0, 1.0 / 512.0);
  const int nT = grid.horizon_index();

  // no delay coupling: m' = c
  Tabulation m0 = mean_delay_ode(Tabulation(nT, 0.0), Tabulation(nT, 2.0),
                                 [](double) { return 1.0; }, 0.5, grid);
  CHECK(m0[nT] == doctest::Approx(3.0).epsilon(1e-12));

  // m'(t) = -m(t - 1/2), m = 1 on [-1/2, 0]:
  // m(t) = 1 - t on [0, 1/2], then 1.125 - 1.5 t + t^2/2; m(1) = 0.125
  Tabulation m1 = mean_delay_ode(Tabulation(nT, 1.0), Tabulation(nT, 0.0),
                                 [](double) { return 1.0; }, 0.5, grid);
  CHECK(m1[nT / 2] == doctest::Approx(0.5).epsilon(5e-3));
  CHECK(m1[nT] == doctest::Approx(0.125).epsilon(2e-2));
}

TEST_CASE("constant control has the right shape") {
  TimeGrid grid(1.0, 0.0, 1.0 / 8.0);
  Eigen::MatrixXd u = constant_control(1.5, 10, grid);
  CHECK(u.rows() == 10);
  CHECK(u.cols() == 9);
  CHECK(u.minCoeff() == 1.5);
  CHECK(u.maxCoeff() == 1.5);
}
