#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfabsde/kernel.hpp"
#include "mfabsde/parallel.hpp"
#include "mfabsde/paths.hpp"

using namespace mfabsde;

TEST_CASE("constant function norm is exact at any resolution") {
  for (double h : {0.55, 0.75, 0.9})
    for (double T : {0.5, 1.0, 2.0}) {
      TimeGrid grid(T, 0.0, T / 16.0);
      KernelMatrix kernel(grid, HurstParameter(h));
      const Tabulation ones(grid.node_count(), 1.0);
      CHECK(kernel.inner_product(ones, ones, T) ==
            doctest::Approx(std::pow(T, 2.0 * h)).epsilon(1e-12));
      CHECK(kernel.norm_sq(ones, T) ==
            doctest::Approx(std::pow(T, 2.0 * h)).epsilon(1e-12));
    }
}

// For H = 3/4 the double integral of s t phi(|s-t|) over [0,1]^2 is 2/7
// (inner beta integral B(2, 1/2) = 4/3, outer integral 2/7 after the
// symmetry factor).
TEST_CASE("linear function norm converges to the closed form") {
  const double target = 2.0 / 7.0;
  double prev = -1.0;
  for (double inv : {64.0, 128.0, 256.0}) {
    TimeGrid grid(1.0, 0.0, 1.0 / inv);
    KernelMatrix kernel(grid, HurstParameter(0.75));
    const Tabulation t = tabulate(grid, [](double s) { return s; });
    const double v = kernel.inner_product(t, t, 1.0);
    const double err = std::abs(v - target);
    CHECK(err < 5e-4);
    if (prev >= 0.0) CHECK(err < prev);
    prev = err;
  }
}

// sigma(v) = v gives sigma_hat(t) = t^{2H} / 2 exactly (beta integral),
// and sigma constant gives sigma_hat(t) = H t^{2H-1}.
TEST_CASE("sigma_hat closed forms") {
  for (double h : {0.6, 0.75, 0.9}) {
    TimeGrid grid(1.0, 0.0, 1.0 / 256.0);
    KernelMatrix kernel(grid, HurstParameter(h));
    const Tabulation lin = tabulate(grid, [](double s) { return s; });
    const Tabulation one(grid.node_count(), 1.0);
    for (double t : {0.25, 0.5, 1.0}) {
      CHECK(kernel.sigma_hat(lin, t) ==
            doctest::Approx(0.5 * std::pow(t, 2.0 * h)).epsilon(2e-3));
      CHECK(kernel.sigma_hat(one, t) ==
            doctest::Approx(h * std::pow(t, 2.0 * h - 1.0)).epsilon(2e-3));
    }
    // norm growth identity d/dt ||1||_t^2 = 2H t^{2H-1}
    CHECK(kernel.norm_growth(one, 0.5) ==
          doctest::Approx(2.0 * h * std::pow(0.5, 2.0 * h - 1.0))
              .epsilon(2e-3));
  }
}

TEST_CASE("norm_sq_profile matches norm_sq at every node") {
  TimeGrid grid(1.0, 0.5, 1.0 / 32.0);
  KernelMatrix kernel(grid, HurstParameter(0.75));
  const Tabulation f = tabulate(grid, [](double s) { return 1.0 + s * s; });
  const auto profile = kernel.norm_sq_profile(f);
  REQUIRE(static_cast<int>(profile.size()) == grid.node_count());
  CHECK(profile[0] == 0.0);
  for (int i = 1; i < grid.node_count(); i += 7)
    CHECK(profile[i] ==
          doctest::Approx(kernel.norm_sq(f, grid.time(i))).epsilon(1e-10));
}

// For sigma(v) = 1 + v the ratio sigma_hat / (sigma t^{2H-1}) equals
// (H + t/2) / (1 + t) in the continuum, which stays well inside [1/2, 2],
// so the returned bound is the inflation floor.
TEST_CASE("m_bound against the closed-form ratio") {
  TimeGrid grid(1.0, 0.0, 1.0 / 128.0);
  const double h = 0.75;
  KernelMatrix kernel(grid, HurstParameter(h));
  const Tabulation sig = tabulate(grid, [](double s) { return 1.0 + s; });
  for (double t : {0.25, 0.5, 1.0}) {
    const double q = kernel.sigma_hat(sig, t) /
                     ((1.0 + t) * std::pow(t, 2.0 * h - 1.0));
    CHECK(q == doctest::Approx((h + 0.5 * t) / (1.0 + t)).epsilon(5e-3));
  }
  CHECK(kernel.m_bound(sig) == doctest::Approx(2.0 + 1e-6).epsilon(1e-12));
}

TEST_CASE("m_bound rejects a vanishing volatility") {
  TimeGrid grid(1.0, 0.0, 1.0 / 16.0);
  KernelMatrix kernel(grid, HurstParameter(0.75));
  Tabulation sig(grid.node_count(), 1.0);
  sig[8] = 0.0;
  CHECK_THROWS_AS((void)kernel.m_bound(sig), std::domain_error);
}

TEST_CASE("semidefinite cholesky reconstructs and rejects") {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 4);
  ParticleRng rng(7, 0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) B(i, j) = rng.normal();
  Eigen::MatrixXd A = B * B.transpose();  // rank deficient PSD
  Eigen::MatrixXd L = semidefinite_cholesky(A);
  CHECK((L * L.transpose() - A).cwiseAbs().maxCoeff() < 1e-9);

  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS((void)semidefinite_cholesky(neg), std::runtime_error);
}

TEST_CASE("serial and parallel kernel assembly agree bitwise") {
  TimeGrid grid(1.0, 0.25, 1.0 / 64.0);
  set_default_exec(Exec::Serial);
  KernelMatrix ks(grid, HurstParameter(0.8));
  set_default_exec(Exec::OpenMP);
  KernelMatrix kp(grid, HurstParameter(0.8));
  CHECK((ks.covariance() - kp.covariance()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ks.cholesky() - kp.cholesky()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross weights sum to the inner product with the indicator") {
  TimeGrid grid(1.0, 0.0, 1.0 / 32.0);
  KernelMatrix kernel(grid, HurstParameter(0.7));
  const Tabulation f = tabulate(grid, [](double s) { return 2.0 - s; });
  const auto cw = kernel.cross_weights(f);
  // sum over i of mid_i * cross_weights[i] is the strictly-lower-
  // triangular part of <f, f>, i.e. (||f||^2 - diagonal cells) / 2.
  std::vector<double> cells(grid.cell_count());
  for (int i = 0; i < grid.cell_count(); ++i)
    cells[i] = 0.5 * (f[i] + f[i + 1]);
  double total = 0.0, diag = 0.0;
  for (int i = 0; i < grid.cell_count(); ++i) {
    total += cells[i] * cw[i];
    diag += kernel.phi_cell_weights()(i, i) * cells[i] * cells[i];
  }
  const double full = kernel.inner_product_cells(cells, cells, grid.end());
  CHECK(total == doctest::Approx((full - diag) / 2.0).epsilon(1e-9));
}

TEST_CASE("hurst parameter validation") {
  CHECK_THROWS_AS(HurstParameter(0.5), std::invalid_argument);
  CHECK_THROWS_AS(HurstParameter(1.0), std::invalid_argument);
  CHECK_NOTHROW(HurstParameter(0.75));
}
