#include "mfabsde/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace mfabsde {

void validate_eta(const EtaSpec& spec, const TimeGrid& grid) {
  const int n = grid.node_count();
  if (static_cast<int>(spec.b.size()) < n ||
      static_cast<int>(spec.sigma.size()) < n)
    throw std::invalid_argument("eta: coefficient tabulations too short");
  const double sign = spec.sigma[1] >= 0.0 ? 1.0 : -1.0;
  for (int i = 1; i < n; ++i)
    if (sign * spec.sigma[i] <= 0.0)
      throw std::invalid_argument(
          "eta: sigma must be nonvanishing and single-signed on (0, T+K]");
}

PathEnsemble simulate_eta(const EtaSpec& spec, const PathEnsemble& fbm,
                          Exec exec) {
  validate_eta(spec, fbm.grid);
  const int n = fbm.grid.node_count();
  const int N = fbm.particle_count();
  const double dt = fbm.grid.dt();
  PathEnsemble out{fbm.grid, PathLabel::Eta, fbm.seed,
                   Eigen::MatrixXd(N, n)};
  for_each_index(
      N,
      [&](std::int64_t p) {
        double x = spec.eta0;
        out.values(p, 0) = x;
        for (int i = 0; i + 1 < n; ++i) {
          x += spec.b[i] * dt +
               spec.sigma[i] * (fbm.values(p, i + 1) - fbm.values(p, i));
          out.values(p, i + 1) = x;
        }
      },
      exec);
  return out;
}

PathEnsemble markov_eta_ensemble(const EtaSpec& spec,
                                 const KernelMatrix& kernel, int N,
                                 std::uint64_t seed, Exec exec) {
  const TimeGrid& grid = kernel.grid();
  validate_eta(spec, grid);
  const int n = grid.node_count();
  const double dt = grid.dt();
  const std::vector<double> gamma = kernel.norm_sq_profile(spec.sigma);
  std::vector<double> step_sd(n - 1);
  for (int i = 0; i + 1 < n; ++i)
    step_sd[i] = std::sqrt(std::max(gamma[i + 1] - gamma[i], 0.0));

  PathEnsemble out{grid, PathLabel::Eta, seed, Eigen::MatrixXd(N, n)};
  for_each_index(
      N,
      [&](std::int64_t p) {
        ParticleRng rng(seed, static_cast<std::uint64_t>(p));
        double x = spec.eta0;
        out.values(p, 0) = x;
        for (int i = 0; i + 1 < n; ++i) {
          x += spec.b[i] * dt + step_sd[i] * rng.normal();
          out.values(p, i + 1) = x;
        }
      },
      exec);
  return out;
}

Eigen::MatrixXd constant_control(double c, int N, const TimeGrid& grid) {
  return Eigen::MatrixXd::Constant(N, grid.horizon_index() + 1, c);
}

PathEnsemble simulate_state(const StateSpec& spec,
                            const Eigen::MatrixXd& control,
                            const PathEnsemble& fbm, Exec exec) {
  const TimeGrid& fgrid = fbm.grid;
  const int nT = fgrid.horizon_index();
  const int N = fbm.particle_count();
  const double dt = fgrid.dt();
  if (control.rows() != N || control.cols() < nT + 1)
    throw std::invalid_argument("simulate_state: control shape mismatch");
  if (static_cast<int>(spec.vol.size()) < nT + 1)
    throw std::invalid_argument("simulate_state: vol tabulation too short");
  const int dshift = static_cast<int>(std::lround(spec.delta / dt));
  if (std::abs(dshift * dt - spec.delta) > 1e-9 * dt)
    throw std::invalid_argument("simulate_state: delta not grid-aligned");

  TimeGrid sgrid(fgrid.horizon(), 0.0, dt);
  PathEnsemble out{sgrid, PathLabel::State, fbm.seed,
                   Eigen::MatrixXd(N, nT + 1)};
  out.values.col(0).setConstant(spec.x0(0.0));

  for (int i = 0; i < nT; ++i) {
    const double t = sgrid.time(i);
    // ensemble moments close the mean-field coupling at this step
    double s1 = 0.0, s3 = 0.0;
    for (int p = 0; p < N; ++p) {
      s1 += spec.psi1(out.values(p, i));
      s3 += spec.psi3(control(p, i));
    }
    s1 /= N;
    s3 /= N;
    double s2;
    if (i < dshift) {
      s2 = spec.psi2(spec.x0(t - spec.delta));
    } else {
      s2 = 0.0;
      for (int p = 0; p < N; ++p) s2 += spec.psi2(out.values(p, i - dshift));
      s2 /= N;
    }
    const double drift = spec.drift(t, s1, s2, s3);
    const double vol = spec.vol[i];
    for_each_index(
        N,
        [&](std::int64_t p) {
          out.values(p, i + 1) =
              out.values(p, i) + drift * dt +
              vol * (fbm.values(p, i + 1) - fbm.values(p, i));
        },
        exec);
  }
  return out;
}

Tabulation mean_delay_ode(const Tabulation& beta1, const Tabulation& extra,
                          const std::function<double(double)>& x0,
                          double delta, const TimeGrid& grid) {
  const int nT = grid.horizon_index();
  const double dt = grid.dt();
  const int dshift = static_cast<int>(std::lround(delta / dt));
  if (std::abs(dshift * dt - delta) > 1e-9 * dt)
    throw std::invalid_argument("mean_delay_ode: delta not grid-aligned");
  if (static_cast<int>(beta1.size()) < nT ||
      static_cast<int>(extra.size()) < nT)
    throw std::invalid_argument("mean_delay_ode: tabulation too short");
  Tabulation m(nT + 1);
  m[0] = x0(0.0);
  for (int i = 0; i < nT; ++i) {
    const double mdel =
        i < dshift ? x0(grid.time(i) - delta) : m[i - dshift];
    m[i + 1] = m[i] + dt * (-beta1[i] * mdel + extra[i]);
  }
  return m;
}

}  // namespace mfabsde
