#include "mfabsde/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mfabsde {

namespace {

double sigma_at(const Tabulation& sigma, double t, const TimeGrid& grid) {
  const int i = static_cast<int>(std::lround(t / grid.dt()));
  return sigma[std::min<int>(i, static_cast<int>(sigma.size()) - 1)];
}

int delay_cells(double delta, const TimeGrid& grid) {
  const int d = static_cast<int>(std::lround(delta / grid.dt()));
  if (std::abs(d * grid.dt() - delta) > 1e-9 * grid.dt())
    throw std::invalid_argument("control: delta not grid-aligned");
  return d;
}

}  // namespace

double hamiltonian(const HamiltonianArgs& a, const ControlProblemSpec& spec,
                   const TimeGrid& grid) {
  return spec.f_hat(a.t, a.x, a.xbar, a.r1, a.r2, a.u) +
         a.y * spec.b_hat(a.t, a.s1, a.s2, a.s3) +
         a.z * sigma_at(spec.sigma, a.t, grid);
}

HamiltonianDerivs hamiltonian_derivatives(const HamiltonianArgs& a,
                                          const ControlProblemSpec& spec,
                                          const TimeGrid& grid) {
  (void)grid;
  HamiltonianDerivs d;
  d.dx = spec.df_x(a.t, a.x, a.xbar, a.r1, a.r2, a.u);
  d.dxbar = spec.df_xbar(a.t, a.x, a.xbar, a.r1, a.r2, a.u);
  d.du = spec.df_u(a.t, a.x, a.xbar, a.r1, a.r2, a.u);
  const double fr1 = spec.df_r1(a.t, a.x, a.xbar, a.r1, a.r2, a.u);
  const double fr2 = spec.df_r2(a.t, a.x, a.xbar, a.r1, a.r2, a.u);
  const double bs1 = spec.db_s1(a.t, a.s1, a.s2, a.s3);
  const double bs2 = spec.db_s2(a.t, a.s1, a.s2, a.s3);
  const double bs3 = spec.db_s3(a.t, a.s1, a.s2, a.s3);
  const double y = a.y;
  d.dm1 = [fr1, bs1, y, &spec](double v) {
    return fr1 * spec.dgamma1(v) + y * bs1 * spec.dpsi1(v);
  };
  d.dm2 = [fr2, bs2, y, &spec](double v) {
    return fr2 * spec.dgamma2(v) + y * bs2 * spec.dpsi2(v);
  };
  d.dm3 = [bs3, y, &spec](double v) { return y * bs3 * spec.dpsi3(v); };
  return d;
}

AdjointAssembly build_adjoint(const ControlProblemSpec& spec,
                              const PathEnsemble& state,
                              const Eigen::MatrixXd& control,
                              const TimeGrid& grid) {
  const int nT = grid.horizon_index();
  const int n = grid.node_count();
  const int N = state.particle_count();
  const int dsh = delay_cells(spec.delta, grid);
  if (grid.anticipation() + 1e-12 < spec.delta)
    throw std::invalid_argument("build_adjoint: grid extension shorter than "
                                "the delay");
  if (state.grid.horizon_index() != nT ||
      std::abs(state.grid.dt() - grid.dt()) > 1e-12)
    throw std::invalid_argument("build_adjoint: state grid mismatch");

  // ensemble moments of the state/control pair, node by node
  Tabulation xbar(nT + 1), s1(nT + 1), s2(nT + 1), s3(nT + 1), r1(nT + 1),
      r2(nT + 1), ubar(nT + 1);
  auto col_mean = [&](const std::function<double(double)>& fn, int i) {
    double acc = 0.0;
    for (int p = 0; p < N; ++p) acc += fn(state.values(p, i));
    return acc / N;
  };
  for (int i = 0; i <= nT; ++i) {
    // pre-horizon arguments of the initial path are frozen at x0(0),
    // i.e. column 0 of the state ensemble
    const int idel = std::max(i - dsh, 0);
    xbar[i] = state.values.col(i).mean();
    ubar[i] = control.col(i).mean();
    s1[i] = col_mean(spec.psi1, i);
    s2[i] = col_mean(spec.psi2, idel);
    r1[i] = col_mean(spec.gamma1, i);
    r2[i] = col_mean(spec.gamma2, idel);
    double acc = 0.0;
    for (int p = 0; p < N; ++p) acc += spec.psi3(control(p, i));
    s3[i] = acc / N;
  }
  double r3 = 0.0, gr3_mean = 0.0;
  for (int p = 0; p < N; ++p) r3 += spec.gamma3(state.values(p, nT));
  r3 /= N;
  for (int p = 0; p < N; ++p)
    gr3_mean += spec.dg_r3(state.values(p, nT), r3);
  gr3_mean /= N;

  Tabulation bs1(nT + 1), bs2(nT + 1), fxbar_mean(nT + 1), fr1_mean(nT + 1),
      fr2_mean(nT + 1);
  for (int i = 0; i <= nT; ++i) {
    const double t = grid.time(i);
    bs1[i] = spec.db_s1(t, s1[i], s2[i], s3[i]);
    bs2[i] = spec.db_s2(t, s1[i], s2[i], s3[i]);
    double axbar = 0.0, ar1 = 0.0, ar2 = 0.0;
    for (int p = 0; p < N; ++p) {
      const double x = state.values(p, i);
      const double u = control(p, i);
      axbar += spec.df_xbar(t, x, xbar[i], r1[i], r2[i], u);
      ar1 += spec.df_r1(t, x, xbar[i], r1[i], r2[i], u);
      ar2 += spec.df_r2(t, x, xbar[i], r1[i], r2[i], u);
    }
    fxbar_mean[i] = axbar / N;
    fr1_mean[i] = ar1 / N;
    fr2_mean[i] = ar2 / N;
  }

  AdjointAssembly out;
  out.mean_path.assign(n, xbar[nT]);
  for (int i = 0; i <= nT; ++i) out.mean_path[i] = xbar[i];
  out.eta_spec = EtaSpec{0.0, Tabulation(n, 0.0), spec.sigma};
  out.delays = constant_delays(spec.delta, spec.delta);

  const bool mean_term = *std::max_element(bs1.begin(), bs1.end(),
                                           [](double a, double b) {
                                             return std::abs(a) <
                                                    std::abs(b);
                                           }) != 0.0;
  const bool shift_term = *std::max_element(bs2.begin(), bs2.end(),
                                            [](double a, double b) {
                                              return std::abs(a) <
                                                     std::abs(b);
                                            }) != 0.0;

  GeneratorSpec gen;
  gen.uses = UsesX;
  if (mean_term) gen.uses |= UsesYMean;
  if (shift_term) gen.uses |= UsesYShiftMean;
  gen.cls = mean_term && shift_term ? GeneratorClass::MeanFieldAnticipated
            : shift_term            ? GeneratorClass::DeterministicAnticipated
            : mean_term             ? GeneratorClass::MeanField
                                    : GeneratorClass::Plain;
  double c1 = 0.0, c2 = 0.0;
  for (int i = 0; i <= nT; ++i) {
    c1 = std::max(c1, std::abs(bs1[i]));
    c2 = std::max(c2, std::abs(bs2[i]));
  }
  gen.lipschitz_C =
      spec.adjoint_lipschitz >= 0.0 ? spec.adjoint_lipschitz : c1 + c2;

  const double dt = grid.dt();
  const ControlProblemSpec* sp = &spec;
  Tabulation mean_path = out.mean_path;
  gen.f = [sp, nT, dsh, dt, mean_path, xbar, r1, r2, ubar, bs1, bs2,
           fxbar_mean, fr1_mean, fr2_mean](const DriverArgs& a) {
    const int i = a.node;
    const double xp = mean_path[i] + a.x;
    double v = sp->df_x(a.t, xp, xbar[std::min(i, nT)], r1[std::min(i, nT)],
                        r2[std::min(i, nT)], ubar[std::min(i, nT)]);
    v += sp->dgamma1(xp) * fr1_mean[std::min(i, nT)] +
         a.y_mean * bs1[std::min(i, nT)] * sp->dpsi1(xp);
    const int j = i + dsh;
    if (j <= nT) {
      v += fxbar_mean[j];
      v += sp->dgamma2(xp) * fr2_mean[j] +
           a.y_shift_mean * bs2[j] * sp->dpsi2(xp);
    }
    return v;
  };
  out.gen = gen;

  const double mT = xbar[nT];
  auto term_g = [sp, mT, r3, gr3_mean](double eta) {
    const double x = mT + eta;
    return sp->dg_x(x, r3) + gr3_mean * sp->dgamma3(x);
  };
  const double sigT = spec.sigma[nT];
  out.terminal.g = term_g;
  out.terminal.h = [term_g, sigT](double eta) {
    const double h = 1e-5 * (1.0 + std::abs(eta));
    return sigT * (term_g(eta + h) - term_g(eta - h)) / (2.0 * h);
  };
  return out;
}

SolutionField solve_adjoint_stepwise(const AdjointAssembly& assembly,
                                     const PathEnsemble& eta,
                                     const KernelMatrix& kernel,
                                     const SolverConfig& cfg) {
  const GeneratorSpec& gen = assembly.gen;
  const TimeGrid& grid = eta.grid;
  const int nT = grid.horizon_index();
  const int n = grid.node_count();
  const int N = eta.particle_count();
  const double dt = grid.dt();

  const unsigned current_time_bits =
      UsesY | UsesZ | UsesYMean | UsesZMean | UsesYShift | UsesZShift;
  const int dsh = delay_cells(assembly.delays.delta ? assembly.delays.delta(0)
                                                    : 0.0,
                              grid);
  if ((gen.uses & current_time_bits) || dsh == 0) {
    std::fprintf(stderr,
                 "solve_adjoint_stepwise: anticipation is not a plain "
                 "expectation of the future; falling back to picard_solve\n");
    return picard_solve(gen, assembly.terminal, eta, assembly.eta_spec.sigma,
                        kernel, assembly.delays, cfg);
  }

  SolutionField field{grid,
                      Eigen::MatrixXd::Zero(N, n),
                      Eigen::MatrixXd::Zero(N, n),
                      std::vector<NodeBasis>(nT + 1),
                      assembly.eta_spec.sigma,
                      Tabulation(n, 0.0)};
  extend_terminal(assembly.terminal, eta, field);

  // one backward sweep: the driver at node i reads only strictly future
  // values, which are already final
  Eigen::MatrixXd D(N, nT + 1);
  auto eval_driver = [&](int i) {
    DriverArgs base;
    base.node = i;
    base.t = grid.time(i);
    if (gen.uses & UsesYShiftMean)
      base.y_shift_mean = mean_field_expectation(
          field.Y.col(shift_index(i, assembly.delays.delta, grid)));
    if (gen.uses & UsesZShiftMean)
      base.z_shift_mean = mean_field_expectation(
          field.Z.col(shift_index(i, assembly.delays.zeta, grid)));
    for_each_index(
        N,
        [&](std::int64_t p) {
          DriverArgs a = base;
          a.x = eta.values(p, i);
          D(p, i) = gen.f(a);
        },
        cfg.exec);
  };
  eval_driver(nT);
  for (int i = nT - 1; i >= 0; --i) {
    eval_driver(i);
    const Eigen::VectorXd targets =
        field.Y.col(i + 1) + 0.5 * dt * (D.col(i) + D.col(i + 1));
    Regression reg =
        conditional_expectation(targets, eta.values.col(i), cfg.degree);
    field.Y.col(i) = reg.fitted;
    field.basis[i] = reg.basis;
    field.regression_rms[i] = reg.rms;
    for_each_index(
        N,
        [&](std::int64_t p) {
          field.Z(p, i) = assembly.eta_spec.sigma[i] *
                          reg.basis.eval_deriv(eta.values(p, i));
        },
        cfg.exec);
  }
  return field;
}

PerformanceEstimate performance(const ControlProblemSpec& spec,
                                const PathEnsemble& state,
                                const Eigen::MatrixXd& control) {
  const TimeGrid& grid = state.grid;
  const int nT = grid.horizon_index();
  const int N = state.particle_count();
  const double dt = grid.dt();
  const int dsh = delay_cells(spec.delta, grid);

  Tabulation xbar(nT + 1), r1(nT + 1), r2(nT + 1);
  for (int i = 0; i <= nT; ++i) {
    const int idel = std::max(i - dsh, 0);
    xbar[i] = state.values.col(i).mean();
    double a1 = 0.0, a2 = 0.0;
    for (int p = 0; p < N; ++p) {
      a1 += spec.gamma1(state.values(p, i));
      a2 += spec.gamma2(state.values(p, idel));
    }
    r1[i] = a1 / N;
    r2[i] = a2 / N;
  }
  double r3 = 0.0;
  for (int p = 0; p < N; ++p) r3 += spec.gamma3(state.values(p, nT));
  r3 /= N;

  double m = 0.0, v = 0.0;
  for (int p = 0; p < N; ++p) {
    double j = spec.g_hat(state.values(p, nT), r3);
    for (int i = 0; i < nT; ++i)
      j += spec.f_hat(grid.time(i), state.values(p, i), xbar[i], r1[i],
                      r2[i], control(p, i)) *
           dt;
    m += j;
    v += j * j;
  }
  m /= N;
  v = v / N - m * m;
  return {m, std::sqrt(std::max(v, 0.0) / N)};
}

SufficientPrincipleReport verify_sufficient_principle(
    const ControlProblemSpec& spec, const Eigen::MatrixXd& control,
    const PathEnsemble& state, const SolutionField& adjoint,
    const PathEnsemble& adjoint_eta, const Tabulation& mean_path,
    const std::vector<PerformanceEstimate>& challenger_performance,
    const PerformanceEstimate& candidate_performance) {
  const TimeGrid& grid = state.grid;
  const int nT = grid.horizon_index();
  const int N = state.particle_count();
  const int dsh = delay_cells(spec.delta, grid);

  auto moments_at = [&](int i, HamiltonianArgs* a) {
    const int idel = std::max(i - dsh, 0);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, r1 = 0.0, r2 = 0.0;
    for (int p = 0; p < N; ++p) {
      s1 += spec.psi1(state.values(p, i));
      s2 += spec.psi2(state.values(p, idel));
      s3 += spec.psi3(control(p, i));
      r1 += spec.gamma1(state.values(p, i));
      r2 += spec.gamma2(state.values(p, idel));
    }
    a->s1 = s1 / N;
    a->s2 = s2 / N;
    a->s3 = s3 / N;
    a->r1 = r1 / N;
    a->r2 = r2 / N;
    a->xbar = state.values.col(i).mean();
    a->t = grid.time(i);
  };

  SufficientPrincipleReport rep;

  // (a) maximum condition and (b) vanishing law derivative along the path
  double worst_gap = 0.0, worst_law = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int p = (k * N) / 100;
    const int i = (k * 7) % (nT + 1);
    HamiltonianArgs a;
    moments_at(i, &a);
    a.x = state.values(p, i);
    a.u = control(p, i);
    a.y = adjoint.Y(p, i);
    a.z = adjoint.Z(p, i);
    const double h_star = hamiltonian(a, spec, grid);
    double h_max = h_star;
    for (int q = 0; q <= 200; ++q) {
      HamiltonianArgs b = a;
      b.u = spec.u_min + (spec.u_max - spec.u_min) * q / 200.0;
      h_max = std::max(h_max, hamiltonian(b, spec, grid));
    }
    worst_gap = std::max(worst_gap, h_max - h_star);
    const HamiltonianDerivs d = hamiltonian_derivatives(a, spec, grid);
    worst_law = std::max(worst_law, std::abs(d.dm3(a.u)));
  }
  rep.max_condition_gap = worst_gap;
  rep.maximum_condition = worst_gap <= 1e-8;
  rep.law_condition_max = worst_law;
  rep.law_condition = worst_law <= 1e-12;

  // (c) secant concavity of H in (x, xbar, u, s1, s2, s3) and of g
  ParticleRng rng(0xc0ffeeULL, 0);
  double worst_deficit = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int p = static_cast<int>(rng.uniform() * N) % N;
    const int i = static_cast<int>(rng.uniform() * (nT + 1)) % (nT + 1);
    HamiltonianArgs a, b;
    moments_at(i, &a);
    b = a;
    const double y = std::abs(adjoint.Y(p, i));  // concavity needs y >= 0
    a.y = b.y = y;
    a.z = b.z = adjoint.Z(p, i);
    auto jitter = [&](double* va, double* vb) {
      *va += rng.normal();
      *vb += rng.normal();
    };
    jitter(&a.x, &b.x);
    jitter(&a.xbar, &b.xbar);
    jitter(&a.u, &b.u);
    jitter(&a.s1, &b.s1);
    jitter(&a.s2, &b.s2);
    jitter(&a.s3, &b.s3);
    HamiltonianArgs mid = a;
    mid.x = 0.5 * (a.x + b.x);
    mid.xbar = 0.5 * (a.xbar + b.xbar);
    mid.u = 0.5 * (a.u + b.u);
    mid.s1 = 0.5 * (a.s1 + b.s1);
    mid.s2 = 0.5 * (a.s2 + b.s2);
    mid.s3 = 0.5 * (a.s3 + b.s3);
    const double deficit = 0.5 * (hamiltonian(a, spec, grid) +
                                  hamiltonian(b, spec, grid)) -
                           hamiltonian(mid, spec, grid);
    worst_deficit = std::max(worst_deficit, deficit);

    const double x1 = rng.normal(), x2 = rng.normal();
    const double r31 = rng.normal(), r32 = rng.normal();
    const double gdef =
        0.5 * (spec.g_hat(x1, r31) + spec.g_hat(x2, r32)) -
        spec.g_hat(0.5 * (x1 + x2), 0.5 * (r31 + r32));
    worst_deficit = std::max(worst_deficit, gdef);
  }
  rep.concavity_worst = worst_deficit;
  rep.concavity = worst_deficit <= 1e-9;
  (void)adjoint_eta;
  (void)mean_path;

  // (d) optimality against the challengers
  rep.optimality = true;
  for (const PerformanceEstimate& ch : challenger_performance) {
    const double se = std::sqrt(candidate_performance.se *
                                    candidate_performance.se +
                                ch.se * ch.se);
    const double margin =
        (candidate_performance.value - ch.value) / std::max(se, 1e-300);
    rep.challenger_margins.push_back(margin);
    if (margin < 3.0) rep.optimality = false;
  }
  return rep;
}

}  // namespace mfabsde
