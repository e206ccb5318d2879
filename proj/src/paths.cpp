#include "mfabsde/paths.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfabsde {

namespace {

std::uint64_t splitmix_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

ParticleRng::ParticleRng(std::uint64_t seed, std::uint64_t particle)
    : state_(splitmix_mix(seed + 0x9e3779b97f4a7c15ULL) ^
             splitmix_mix(particle * 0xbf58476d1ce4e5b9ULL +
                          0x94d049bb133111ebULL)) {}

std::uint64_t ParticleRng::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return splitmix_mix(state_);
}

double ParticleRng::uniform() {
  return (next() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double ParticleRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

PathEnsemble sample_fbm(const KernelMatrix& kernel, int N, std::uint64_t seed,
                        Exec exec) {
  if (N < 1) throw std::invalid_argument("sample_fbm: N must be >= 1");
  const TimeGrid& grid = kernel.grid();
  const int n = grid.node_count();
  PathEnsemble out{grid, PathLabel::FBM, seed, Eigen::MatrixXd(N, n)};

  const Eigen::MatrixXd Lt = kernel.cholesky().transpose();
  constexpr std::int64_t kChunk = 1024;  // fixed: results independent of
                                         // worker count
  for_each_chunk(
      N, kChunk,
      [&](std::int64_t lo, std::int64_t hi) {
        Eigen::MatrixXd Z(hi - lo, n);
        for (std::int64_t p = lo; p < hi; ++p) {
          ParticleRng rng(seed, static_cast<std::uint64_t>(p));
          for (int j = 0; j < n; ++j) Z(p - lo, j) = rng.normal();
        }
        out.values.middleRows(lo, hi - lo).noalias() = Z * Lt;
      },
      exec);
  out.values.col(0).setZero();
  return out;
}

Eigen::VectorXd wiener_integral(const Tabulation& f, const PathEnsemble& paths,
                                int upto_node) {
  const int m = upto_node < 0 ? paths.grid.horizon_index() : upto_node;
  if (m > paths.grid.cell_count())
    throw std::invalid_argument("wiener_integral: node beyond grid");
  if (static_cast<int>(f.size()) < m)
    throw std::invalid_argument("wiener_integral: integrand too short");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(paths.particle_count());
  for (int i = 0; i < m; ++i)
    out += f[i] * (paths.values.col(i + 1) - paths.values.col(i));
  return out;
}

Eigen::VectorXd ito_residual(const ItoFunction& F, const Tabulation& g,
                             const Tabulation& f, const PathEnsemble& paths,
                             const KernelMatrix& kernel, double x0,
                             Exec exec) {
  const TimeGrid& grid = paths.grid;
  const int m = grid.horizon_index();
  if (static_cast<int>(g.size()) < m || static_cast<int>(f.size()) < m + 1)
    throw std::invalid_argument("ito_residual: tabulation too short");

  const std::vector<double> trace = kernel.cross_weights(f);
  std::vector<double> growth(m);
  for (int i = 0; i < m; ++i) growth[i] = kernel.norm_growth(f, grid.time(i));

  const double dt = grid.dt();
  const int N = paths.particle_count();
  Eigen::VectorXd out(N);
  for_each_index(
      N,
      [&](std::int64_t p) {
        double x = x0;
        double rhs = 0.0;
        for (int i = 0; i < m; ++i) {
          const double t = grid.time(i);
          const double db = paths.values(p, i + 1) - paths.values(p, i);
          const double fx = F.dx(t, x);
          const double fxx = F.dxx(t, x);
          rhs += (F.dt(t, x) + fx * g[i] + 0.5 * fxx * growth[i]) * dt;
          rhs += fx * f[i] * db - fxx * trace[i];
          x += g[i] * dt + f[i] * db;
        }
        out(p) = F.value(grid.horizon(), x) - F.value(0.0, x0) - rhs;
      },
      exec);
  return out;
}

}  // namespace mfabsde
