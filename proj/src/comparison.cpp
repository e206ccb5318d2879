#include "mfabsde/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfabsde {

namespace {

constexpr unsigned kAllowedUses = UsesX | UsesY | UsesZ | UsesYShiftMean;

DriverArgs random_args(ParticleRng& rng, const PathEnsemble& eta) {
  DriverArgs a;
  const int N = eta.particle_count();
  const int n = eta.grid.node_count();
  const int p = static_cast<int>(rng.uniform() * N);
  const int i = static_cast<int>(rng.uniform() * eta.grid.horizon_index());
  a.node = i;
  a.t = eta.grid.time(i);
  a.x = eta.values(std::min(p, N - 1), std::min(i, n - 1));
  a.y = 2.0 * rng.normal();
  a.z = 2.0 * rng.normal();
  a.y_shift_mean = 2.0 * rng.normal();
  return a;
}

}  // namespace

void validate_comparison_case(const ComparisonCase& c) {
  if ((c.gen1.uses & ~kAllowedUses) || (c.gen2.uses & ~kAllowedUses))
    throw std::invalid_argument(
        "comparison: drivers must read only (t, x, y, z, E'[Y'(t+d)])");
}

OrderingReport solve_ordered_pair(const ComparisonCase& c,
                                  const PathEnsemble& eta,
                                  const Tabulation& sigma,
                                  const KernelMatrix& kernel,
                                  const DelaySpec& delays,
                                  const SolverConfig& cfg) {
  validate_comparison_case(c);
  const TimeGrid& grid = eta.grid;
  const int nT = grid.horizon_index();
  const int N = eta.particle_count();

  // hypothesis spot checks
  for (int i = nT; i < grid.node_count(); ++i)
    for (int p = 0; p < N; ++p) {
      const double v = eta.values(p, i);
      if (c.terminal1.g(v) > c.terminal2.g(v) + 1e-12)
        throw std::invalid_argument(
            "comparison: g1 <= g2 fails on the sampled terminal range");
    }
  ParticleRng rng(0x5eedf00dULL, 0);
  for (int k = 0; k < 1000; ++k) {
    DriverArgs a = random_args(rng, eta);
    if (c.gen1.f(a) > c.gen2.f(a) + 1e-12)
      throw std::invalid_argument(
          "comparison: f1 <= f2 fails on randomized arguments");
  }

  OrderingReport rep;
  rep.field1 = picard_solve(c.gen1, c.terminal1, eta, sigma, kernel, delays,
                            cfg);
  rep.field2 = picard_solve(c.gen2, c.terminal2, eta, sigma, kernel, delays,
                            cfg);

  rep.eps_reg.assign(nT + 1, 0.0);
  rep.violation_fraction.assign(nT + 1, 0.0);
  rep.max_violation.assign(nT + 1, 0.0);
  bool pass = true;
  for (int i = 0; i <= nT; ++i) {
    rep.eps_reg[i] = 3.0 * (rep.field1.regression_rms[i] +
                            rep.field2.regression_rms[i]);
    int bad = 0;
    double worst = 0.0;
    for (int p = 0; p < N; ++p) {
      const double d = rep.field1.Y(p, i) - rep.field2.Y(p, i);
      worst = std::max(worst, d);
      if (d > rep.eps_reg[i]) ++bad;
    }
    rep.violation_fraction[i] = static_cast<double>(bad) / N;
    rep.max_violation[i] = worst;
    if (rep.violation_fraction[i] > 1e-3) pass = false;
  }
  rep.pass = pass;
  return rep;
}

MonotoneReport monotone_sequence(const ComparisonCase& c,
                                 const PathEnsemble& eta,
                                 const Tabulation& sigma,
                                 const KernelMatrix& kernel,
                                 const DelaySpec& delays,
                                 const SolverConfig& cfg, int steps) {
  validate_comparison_case(c);
  if (!c.gen1_increasing_in_shift_mean)
    throw std::invalid_argument(
        "monotone_sequence: gen1 must be declared increasing in the "
        "anticipated mean");
  {
    ParticleRng rng(0xabcdef12ULL, 0);
    for (int k = 0; k < 1000; ++k) {
      DriverArgs a = random_args(rng, eta);
      DriverArgs b = a;
      b.y_shift_mean = a.y_shift_mean + std::abs(rng.normal());
      if (c.gen1.f(a) > c.gen1.f(b) + 1e-12)
        throw std::invalid_argument(
            "monotone_sequence: f1 not increasing on randomized arguments");
    }
  }

  const TimeGrid& grid = eta.grid;
  const int nT = grid.horizon_index();
  const int N = eta.particle_count();

  MonotoneReport rep;
  PicardDiagnostics diag;
  rep.limit = picard_solve(c.gen1, c.terminal1, eta, sigma, kernel, delays,
                           cfg, &diag);
  const double beta = diag.beta;
  const double two_h = kernel.hurst().two_h();

  std::vector<int> ds(nT + 1, 0);
  for (int i = 0; i <= nT; ++i) ds[i] = shift_index(i, delays.delta, grid);

  SolutionField prev = picard_solve(c.gen2, c.terminal2, eta, sigma, kernel,
                                    delays, cfg);
  rep.eps_reg.assign(nT + 1, 0.0);
  rep.monotone = true;
  for (int k = 1; k <= steps; ++k) {
    Tabulation frozen(nT + 1, 0.0);
    for (int i = 0; i <= nT; ++i)
      frozen[i] = mean_field_expectation(prev.Y.col(ds[i]));
    GeneratorSpec step = c.gen1;
    step.uses = c.gen1.uses & ~unsigned(UsesYShiftMean);
    step.cls = GeneratorClass::Plain;
    step.f = [&c, &frozen](const DriverArgs& a) {
      DriverArgs b = a;
      b.y_shift_mean = frozen[a.node];
      return c.gen1.f(b);
    };
    SolutionField cur = picard_solve(step, c.terminal1, eta, sigma, kernel,
                                     delays, cfg);

    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= nT; ++i) {
      const double eps =
          3.0 * (prev.regression_rms[i] + cur.regression_rms[i]);
      rep.eps_reg[i] = std::max(rep.eps_reg[i], eps);
      double node_max = 0.0;
      for (int p = 0; p < N; ++p)
        node_max = std::max(node_max, cur.Y(p, i) - prev.Y(p, i));
      worst = std::max(worst, node_max);
      if (node_max > eps) rep.monotone = false;
    }
    rep.max_increase.push_back(worst);

    double dY, dZ;
    weighted_distance(cur, rep.limit, beta, two_h, &dY, &dZ);
    rep.dist_to_limit.push_back(dY + dZ);
    prev = std::move(cur);
  }
  return rep;
}

}  // namespace mfabsde
