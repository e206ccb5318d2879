#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mfabsde/parallel.hpp"
#include "mfabsde/time_grid.hpp"

namespace mfabsde {

// Hurst parameter restricted to the long-memory regime (1/2, 1).
class HurstParameter {
 public:
  explicit HurstParameter(double h);
  double value() const { return h_; }
  double two_h() const { return 2.0 * h_; }

 private:
  double h_;
};

// phi(x) = H(2H-1)|x|^{2H-2}; singular at x = 0.
double phi(double x, HurstParameter H);

// Node-aligned values of a function on the grid.
using Tabulation = std::vector<double>;

Tabulation tabulate(const TimeGrid& grid,
                    const std::function<double(double)>& f);

// Quadrature tableau of phi over the grid cells, the fBm covariance of the
// nodes and its semidefinite-tolerant Cholesky factor.
//
// Cell weights are exact: with Psi(x) = |x|^{2H}/2 the double integral of
// phi over [a1,a2]x[b1,b2] is Psi(a2-b1) + Psi(a1-b2) - Psi(a1-b1) -
// Psi(a2-b2). Tabulated functions enter through cell midpoints (the mean of
// the two adjacent node values), so the kernel singularity is never hit and
// <1,1>_T = T^{2H} holds exactly.
class KernelMatrix {
 public:
  KernelMatrix(const TimeGrid& grid, HurstParameter H,
               Exec exec = default_exec());

  const TimeGrid& grid() const { return grid_; }
  HurstParameter hurst() const { return H_; }
  const Eigen::MatrixXd& phi_cell_weights() const { return weights_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }

  // Quadrature value of the fractional inner product over [0, T]^2; T must
  // be a grid node.
  double inner_product(const Tabulation& xi, const Tabulation& psi,
                       double T) const;
  // Same quadrature with per-cell constants instead of node midpoints;
  // exact second moment of the left-endpoint Riemann sum when fed the
  // left node values.
  double inner_product_cells(const std::vector<double>& a,
                             const std::vector<double>& b, double T) const;
  double norm_sq(const Tabulation& xi, double T) const;
  // ||xi||_{t_i}^2 for every node, consistent with inner_product.
  std::vector<double> norm_sq_profile(const Tabulation& xi) const;

  // sigma_hat(t) = int_0^t phi(t-v) sigma_v dv; exact phi integration per
  // cell, midpoint sigma. t between nodes is linearly interpolated.
  double sigma_hat(const Tabulation& sigma, double t) const;
  double sigma_hat_node(const Tabulation& sigma, int i) const;

  // d/dt ||sigma||_t^2 = 2 sigma_hat(t) sigma(t).
  double norm_growth(const Tabulation& sigma, double t) const;

  // Smallest M with t^{2H-1}/M <= sigma_hat/sigma <= M t^{2H-1} on the
  // interior nodes of [0, T], inflated to at least 2 + 1e-6.
  double m_bound(const Tabulation& sigma) const;

  // <xi 1_[0,t_i], 1_(t_i, t_{i+1}]>_H for every cell i; the Malliavin
  // trace weights of the discrete divergence sum.
  std::vector<double> cross_weights(const Tabulation& xi) const;

 private:
  double cell_mid(const Tabulation& v, int cell) const;

  TimeGrid grid_;
  HurstParameter H_;
  Eigen::MatrixXd weights_;  // cell x cell
  Eigen::MatrixXd cov_;      // node x node
  Eigen::MatrixXd chol_;
};

// Cholesky that tolerates pivots in [-tol, 0] (treated as exact zeros);
// throws if a pivot is below -tol.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& A,
                                      double tol = 1e-10);

}  // namespace mfabsde
