#include "mfabsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mfabsde {

double NodeBasis::eval(double eta) const {
  const double x = (eta - mu) / scale;
  double acc = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
    acc = acc * x + coeffs(k);
  return acc;
}

double NodeBasis::eval_deriv(double eta) const {
  const double x = (eta - mu) / scale;
  double acc = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k)
    acc = acc * x + k * coeffs(k);
  return acc / scale;
}

void validate_generator(const GeneratorSpec& gen) {
  if (!gen.f) throw std::invalid_argument("generator: missing driver");
  if (gen.lipschitz_C < 0.0)
    throw std::invalid_argument("generator: negative Lipschitz constant");
  const unsigned mean_bits = UsesYMean | UsesZMean;
  const unsigned shift_bits =
      UsesYShift | UsesZShift | UsesYShiftMean | UsesZShiftMean;
  switch (gen.cls) {
    case GeneratorClass::Plain:
      if (gen.uses & (mean_bits | shift_bits))
        throw std::invalid_argument(
            "generator: plain class reads mean-field or anticipated args");
      break;
    case GeneratorClass::MeanField:
      if (gen.uses & shift_bits)
        throw std::invalid_argument(
            "generator: mean-field class reads anticipated args");
      break;
    case GeneratorClass::Anticipated:
      if (gen.uses & mean_bits)
        throw std::invalid_argument(
            "generator: anticipated class reads mean-field args");
      break;
    case GeneratorClass::DeterministicAnticipated:
      if (gen.uses & (UsesY | UsesZ | UsesYShift | UsesZShift))
        throw std::invalid_argument(
            "generator: deterministic-anticipated class reads pathwise args");
      break;
    case GeneratorClass::MeanFieldAnticipated:
      break;
  }
}

double mean_field_expectation(const Eigen::VectorXd& values) {
  if (values.size() == 0)
    throw std::invalid_argument("mean_field_expectation: empty ensemble");
  double acc = 0.0;
  for (Eigen::Index p = 0; p < values.size(); ++p) acc += values(p);
  return acc / static_cast<double>(values.size());
}

Regression conditional_expectation(const Eigen::VectorXd& targets,
                                   const Eigen::VectorXd& regressors,
                                   int degree) {
  const Eigen::Index N = targets.size();
  if (regressors.size() != N)
    throw std::invalid_argument("conditional_expectation: size mismatch");
  if (N <= degree + 1)
    throw std::invalid_argument("conditional_expectation: N too small");

  Regression out;
  const double mu = mean_field_expectation(regressors);
  double var = 0.0;
  for (Eigen::Index p = 0; p < N; ++p) {
    const double d = regressors(p) - mu;
    var += d * d;
  }
  var /= static_cast<double>(N);
  double scale = std::sqrt(var);
  int dmax = degree;
  if (scale < 1e-12 * (1.0 + std::abs(mu))) {
    dmax = 0;  // degenerate regressor (e.g. node 0): plain mean
    scale = 1.0;
  }

  const Eigen::VectorXd x = (regressors.array() - mu) / scale;
  for (int d = dmax;; --d) {
    Eigen::MatrixXd V(N, d + 1);
    V.col(0).setOnes();
    for (int k = 1; k <= d; ++k)
      V.col(k) = V.col(k - 1).cwiseProduct(x);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < d + 1 && d > 0) continue;
    out.basis.coeffs = qr.solve(targets);
    out.basis.mu = mu;
    out.basis.scale = scale;
    out.basis.degree = d;
    out.fitted = V * out.basis.coeffs;
    out.reduced = d < degree;
    out.rms = std::sqrt((targets - out.fitted).squaredNorm() /
                        static_cast<double>(N));
    return out;
  }
}

void extend_terminal(const TerminalSpec& term, const PathEnsemble& eta,
                     SolutionField& field) {
  const int nT = field.grid.horizon_index();
  const int n = field.grid.node_count();
  const int N = eta.particle_count();
  for (int i = nT; i < n; ++i)
    for (int p = 0; p < N; ++p) {
      field.Y(p, i) = term.g(eta.values(p, i));
      field.Z(p, i) = term.h(eta.values(p, i));
    }
}

Eigen::VectorXd extract_z(const SolutionField& field, const PathEnsemble& eta,
                          int node) {
  if (node >= field.grid.horizon_index()) return field.Z.col(node);
  const int N = eta.particle_count();
  Eigen::VectorXd out(N);
  for (int p = 0; p < N; ++p)
    out(p) = field.sigma[node] * field.basis[node].eval_deriv(
                                     eta.values(p, node));
  return out;
}

namespace {

void weighted_norms(const Eigen::MatrixXd& dY, const Eigen::MatrixXd& dZ,
                    const TimeGrid& grid, double beta, double two_h,
                    double* nY, double* nZ) {
  const double dt = grid.dt();
  const double N = static_cast<double>(dY.rows());
  double sy = 0.0, sz = 0.0;
  for (int i = 0; i < grid.node_count(); ++i) {
    const double t = grid.time(i);
    const double wy = std::exp(beta * t);
    const double wz = i == 0 ? 0.0 : std::pow(t, two_h - 1.0) * wy;
    sy += wy * dY.col(i).squaredNorm() / N * dt;
    sz += wz * dZ.col(i).squaredNorm() / N * dt;
  }
  *nY = std::sqrt(sy);
  *nZ = std::sqrt(sz);
}

}  // namespace

void weighted_distance(const SolutionField& a, const SolutionField& b,
                       double beta, double two_h, double* dY, double* dZ) {
  weighted_norms(a.Y - b.Y, a.Z - b.Z, a.grid, beta, two_h, dY, dZ);
}

double default_beta(double C, double L, double M) {
  return 32.0 * C * C * (L + 1.0) * M + 4.0 / M;
}

SolutionField picard_solve(const GeneratorSpec& gen, const TerminalSpec& term,
                           const PathEnsemble& eta, const Tabulation& sigma,
                           const KernelMatrix& kernel, const DelaySpec& delays,
                           const SolverConfig& cfg, PicardDiagnostics* diag) {
  validate_generator(gen);
  const TimeGrid& grid = eta.grid;
  const int n = grid.node_count();
  const int nT = grid.horizon_index();
  const int N = eta.particle_count();
  const double dt = grid.dt();
  const double two_h = kernel.hurst().two_h();
  if (static_cast<int>(sigma.size()) < n)
    throw std::invalid_argument("picard_solve: sigma tabulation too short");

  const DelayValidation dv = validate_delays(delays, grid);
  const double M = kernel.m_bound(sigma);
  const double beta =
      cfg.beta >= 0.0 ? cfg.beta : default_beta(gen.lipschitz_C, dv.L, M);

  const bool need_dshift = gen.uses & (UsesYShift | UsesYShiftMean);
  const bool need_zshift = gen.uses & (UsesZShift | UsesZShiftMean);
  std::vector<int> ds(nT + 1, 0), zs(nT + 1, 0);
  for (int i = 0; i <= nT; ++i) {
    if (need_dshift) ds[i] = shift_index(i, delays.delta, grid);
    if (need_zshift) zs[i] = shift_index(i, delays.zeta, grid);
  }

  SolutionField cur{grid,
                    Eigen::MatrixXd::Zero(N, n),
                    Eigen::MatrixXd::Zero(N, n),
                    std::vector<NodeBasis>(nT + 1),
                    sigma,
                    Tabulation(n, 0.0)};
  extend_terminal(term, eta, cur);
  SolutionField next = cur;

  PicardDiagnostics local;
  local.beta = beta;
  local.M = M;
  local.L = dv.L;

  Eigen::MatrixXd D(N, nT + 1);
  for (int it = 1; it <= cfg.picard_max; ++it) {
    // driver values on the frozen previous iterate
    for (int i = 0; i <= nT; ++i) {
      DriverArgs base;
      base.node = i;
      base.t = grid.time(i);
      if (gen.uses & UsesYMean)
        base.y_mean = mean_field_expectation(cur.Y.col(i));
      if (gen.uses & UsesZMean)
        base.z_mean = mean_field_expectation(cur.Z.col(i));
      if (gen.uses & UsesYShiftMean)
        base.y_shift_mean = mean_field_expectation(cur.Y.col(ds[i]));
      if (gen.uses & UsesZShiftMean)
        base.z_shift_mean = mean_field_expectation(cur.Z.col(zs[i]));
      Eigen::VectorXd yshift, zshift;
      if (gen.uses & UsesYShift) {
        yshift = cur.Y.col(ds[i]);
        if (gen.condition_anticipated && ds[i] > i)
          yshift = conditional_expectation(yshift, eta.values.col(i),
                                           cfg.degree)
                       .fitted;
      }
      if (gen.uses & UsesZShift) {
        zshift = cur.Z.col(zs[i]);
        if (gen.condition_anticipated && zs[i] > i)
          zshift = conditional_expectation(zshift, eta.values.col(i),
                                           cfg.degree)
                       .fitted;
      }
      for_each_index(
          N,
          [&](std::int64_t p) {
            DriverArgs a = base;
            a.x = eta.values(p, i);
            a.y = cur.Y(p, i);
            a.z = cur.Z(p, i);
            if (gen.uses & UsesYShift) a.y_shift = yshift(p);
            if (gen.uses & UsesZShift) a.z_shift = zshift(p);
            D(p, i) = gen.f(a);
          },
          cfg.exec);
    }

    // backward induction with trapezoidal driver integration
    for (int i = nT - 1; i >= 0; --i) {
      const Eigen::VectorXd targets =
          next.Y.col(i + 1) + 0.5 * dt * (D.col(i) + D.col(i + 1));
      Regression reg =
          conditional_expectation(targets, eta.values.col(i), cfg.degree);
      next.Y.col(i) = reg.fitted;
      next.basis[i] = reg.basis;
      next.regression_rms[i] = reg.rms;
      for_each_index(
          N,
          [&](std::int64_t p) {
            next.Z(p, i) =
                sigma[i] * reg.basis.eval_deriv(eta.values(p, i));
          },
          cfg.exec);
    }

    // weighted distances are the contraction diagnostics; stopping uses
    // the beta = 0 norm, since large beta makes early-time error invisible
    const Eigen::MatrixXd diffY = next.Y - cur.Y;
    const Eigen::MatrixXd diffZ = next.Z - cur.Z;
    double dY, dZ, d0Y, d0Z, n0Y, n0Z;
    weighted_norms(diffY, diffZ, grid, beta, two_h, &dY, &dZ);
    weighted_norms(diffY, diffZ, grid, 0.0, two_h, &d0Y, &d0Z);
    weighted_norms(next.Y, next.Z, grid, 0.0, two_h, &n0Y, &n0Z);
    local.dY.push_back(dY);
    local.dZ.push_back(dZ);
    local.ratio.push_back(
        it == 1 ? 1.0
                : (local.dY[it - 2] + local.dZ[it - 2]) > 0.0
                      ? (dY + dZ) / (local.dY[it - 2] + local.dZ[it - 2])
                      : 0.0);
    local.iterations = it;
    std::swap(cur.Y, next.Y);
    std::swap(cur.Z, next.Z);
    std::swap(cur.basis, next.basis);
    std::swap(cur.regression_rms, next.regression_rms);
    if (d0Y + d0Z <= cfg.tol * std::max(1.0, n0Y + n0Z)) {
      local.converged = true;
      break;
    }
  }

  if (diag) *diag = local;
  if (!local.converged)
    throw PicardError("picard_solve: no convergence within picard_max",
                      local);
  return cur;
}

AprioriReport apriori_check(const SolutionField& field, const Tabulation& f0,
                            const TerminalSpec& term, const PathEnsemble& eta,
                            double beta, double M, double two_h) {
  const TimeGrid& grid = field.grid;
  const int nT = grid.horizon_index();
  const int N = field.Y.rows();
  const double dt = grid.dt();

  double drift_term = 0.0;
  for (int i = 0; i < nT; ++i)
    drift_term += std::exp(beta * grid.time(i)) * f0[i] * f0[i] * dt;
  drift_term *= 2.0 / beta;
  const double eT = std::exp(beta * grid.horizon());

  double mL = 0.0, mR = 0.0, vL = 0.0, vR = 0.0;
  for (int p = 0; p < N; ++p) {
    double lhs = field.Y(p, 0) * field.Y(p, 0);
    for (int i = 0; i < nT; ++i) {
      const double t = grid.time(i);
      const double w = std::exp(beta * t);
      lhs += 0.5 * beta * w * field.Y(p, i) * field.Y(p, i) * dt;
      if (i > 0)
        lhs += (2.0 / M) * std::pow(t, two_h - 1.0) * w * field.Z(p, i) *
               field.Z(p, i) * dt;
    }
    const double gT = term.g(eta.values(p, nT));
    const double rhs = eT * gT * gT + drift_term;
    mL += lhs;
    mR += rhs;
    vL += lhs * lhs;
    vR += rhs * rhs;
  }
  mL /= N;
  mR /= N;
  vL = vL / N - mL * mL;
  vR = vR / N - mR * mR;

  AprioriReport rep;
  rep.lhs = mL;
  rep.rhs = mR;
  if (mR == 0.0) {
    rep.ratio = mL == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    rep.pass = mL == 0.0;
    return rep;
  }
  rep.ratio = mL / mR;
  const double seL = std::sqrt(std::max(vL, 0.0) / N);
  const double seR = std::sqrt(std::max(vR, 0.0) / N);
  rep.slack = 5.0 * rep.ratio *
              std::sqrt(seL * seL / (mL * mL) + seR * seR / (mR * mR));
  rep.pass = rep.ratio <= 1.0 + rep.slack;
  return rep;
}

}  // namespace mfabsde
