#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfabsde/kernel.hpp"
#include "mfabsde/parallel.hpp"
#include "mfabsde/paths.hpp"

using namespace mfabsde;

TEST_CASE("particle rng is a deterministic per-particle stream") {
  ParticleRng a(42, 7), b(42, 7), c(42, 8);
  bool same = true, diff = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.normal();
    same = same && (x == b.normal());
    diff = diff || (x != c.normal());
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("rng moments are sane") {
  ParticleRng rng(3, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(double(n)));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("fbm ensemble starts at zero and matches marginal variances") {
  TimeGrid grid(1.0, 0.0, 1.0 / 16.0);
  const double h = 0.75;
  KernelMatrix kernel(grid, HurstParameter(h));
  const int N = 20000;
  PathEnsemble ens = sample_fbm(kernel, N, 11);
  CHECK(ens.values.col(0).cwiseAbs().maxCoeff() == 0.0);
  for (int i : {4, 8, 16}) {
    const double t = grid.time(i);
    const Eigen::ArrayXd col = ens.values.col(i).array();
    const double var = (col - col.mean()).square().mean();
    const double target = std::pow(t, 2.0 * h);
    // SE of the sample variance of a Gaussian is var * sqrt(2/N)
    CHECK(std::abs(var - target) < 5.0 * target * std::sqrt(2.0 / N));
  }
  // Gaussianity of the terminal value: skewness and excess kurtosis
  const Eigen::ArrayXd w =
      ens.values.col(grid.horizon_index()).array() /
      std::sqrt(std::pow(1.0, 2.0 * h));
  const double m = w.mean();
  const double sd = std::sqrt((w - m).square().mean());
  const double skew = ((w - m) / sd).cube().mean();
  const double kurt = ((w - m) / sd).pow(4).mean();
  CHECK(std::abs(skew) < 5.0 * std::sqrt(6.0 / N));
  CHECK(std::abs(kurt - 3.0) < 5.0 * std::sqrt(24.0 / N));
}

TEST_CASE("fbm sampling is identical across execution policies") {
  TimeGrid grid(1.0, 0.0, 1.0 / 32.0);
  KernelMatrix kernel(grid, HurstParameter(0.7));
  PathEnsemble s = sample_fbm(kernel, 500, 5, Exec::Serial);
  PathEnsemble p = sample_fbm(kernel, 500, 5, Exec::OpenMP);
  CHECK((s.values - p.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("wiener integral is linear and recovers increments") {
  TimeGrid grid(1.0, 0.0, 1.0 / 32.0);
  KernelMatrix kernel(grid, HurstParameter(0.75));
  PathEnsemble ens = sample_fbm(kernel, 200, 9);
  const Tabulation f = tabulate(grid, [](double s) { return 1.0 + s; });
  const Tabulation g = tabulate(grid, [](double s) { return s * s; });
  Tabulation fg(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) fg[i] = f[i] + g[i];
  const Eigen::VectorXd wf = wiener_integral(f, ens);
  const Eigen::VectorXd wg = wiener_integral(g, ens);
  const Eigen::VectorXd wfg = wiener_integral(fg, ens);
  CHECK((wfg - wf - wg).cwiseAbs().maxCoeff() < 1e-12);

  const Tabulation one(grid.node_count(), 1.0);
  const Eigen::VectorXd w1 = wiener_integral(one, ens);
  CHECK((w1 - ens.values.col(grid.horizon_index())).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("ito residual vanishes for affine F and shrinks with the step") {
  const ItoFunction affine{
      [](double t, double x) { return 2.0 * x + 3.0 * t; },
      [](double, double) { return 3.0; },
      [](double, double) { return 2.0; },
      [](double, double) { return 0.0; }};
  const ItoFunction square{[](double, double x) { return x * x; },
                           [](double, double) { return 0.0; },
                           [](double, double x) { return 2.0 * x; },
                           [](double, double) { return 2.0; }};
  std::vector<double> means;
  for (double inv : {32.0, 128.0}) {
    TimeGrid grid(1.0, 0.0, 1.0 / inv);
    KernelMatrix kernel(grid, HurstParameter(0.75));
    PathEnsemble ens = sample_fbm(kernel, 4000, 13);
    const Tabulation g = tabulate(grid, [](double s) { return 0.5 - s; });
    const Tabulation f(grid.node_count(), 1.0);
    CHECK(ito_residual(affine, g, f, ens, kernel, 0.2)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    means.push_back(
        ito_residual(square, g, f, ens, kernel, 0.2).cwiseAbs().mean());
  }
  CHECK(means[0] / means[1] > 2.0);
}
