#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "mfabsde/kernel.hpp"
#include "mfabsde/parallel.hpp"
#include "mfabsde/time_grid.hpp"

namespace mfabsde {

// Counter-based per-particle stream: the state is a splitmix64 sequence
// keyed by (seed, particle), so draws are independent of scheduling.
class ParticleRng {
 public:
  ParticleRng(std::uint64_t seed, std::uint64_t particle);

  double uniform();  // in (0, 1)
  double normal();   // standard normal via Box-Muller

 private:
  std::uint64_t next();

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class PathLabel { FBM, Eta, State, Y, Z };

struct PathEnsemble {
  TimeGrid grid;
  PathLabel label;
  std::uint64_t seed;
  Eigen::MatrixXd values;  // particle x node

  int particle_count() const { return static_cast<int>(values.rows()); }
};

// N exact Gaussian paths with the fBm covariance on the grid nodes.
PathEnsemble sample_fbm(const KernelMatrix& kernel, int N, std::uint64_t seed,
                        Exec exec = default_exec());

// Per-particle left-endpoint sum of f dB over cells [0, upto_node); by
// default up to the horizon T.
Eigen::VectorXd wiener_integral(const Tabulation& f, const PathEnsemble& paths,
                                int upto_node = -1);

struct ItoFunction {
  std::function<double(double, double)> value;  // F(t, x)
  std::function<double(double, double)> dt;     // dF/dt
  std::function<double(double, double)> dx;     // dF/dx
  std::function<double(double, double)> dxx;    // d2F/dx2
};

// Residual at T of the change-of-variables formula for X = x0 + int g ds
// + int f dB applied to F. The dB integral is discretized in divergence
// form: the left-endpoint sum minus the exact discrete Malliavin trace
// (kernel cross weights of f), and the quadratic term uses the exact
// derivative of ||f||^2_s.
Eigen::VectorXd ito_residual(const ItoFunction& F, const Tabulation& g,
                             const Tabulation& f, const PathEnsemble& paths,
                             const KernelMatrix& kernel, double x0 = 0.0,
                             Exec exec = default_exec());

}  // namespace mfabsde
