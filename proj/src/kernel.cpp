#include "mfabsde/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace mfabsde {

HurstParameter::HurstParameter(double h) : h_(h) {
  if (!(h > 0.5) || !(h < 1.0))
    throw std::invalid_argument("Hurst parameter must lie in (1/2, 1)");
}

double phi(double x, HurstParameter H) {
  if (x == 0.0)
    throw std::domain_error("phi: kernel is singular at x = 0");
  const double h = H.value();
  return h * (2.0 * h - 1.0) * std::pow(std::abs(x), 2.0 * h - 2.0);
}

Tabulation tabulate(const TimeGrid& grid,
                    const std::function<double(double)>& f) {
  Tabulation v(grid.node_count());
  for (int i = 0; i < grid.node_count(); ++i) v[i] = f(grid.time(i));
  return v;
}

namespace {

// Second antiderivative of phi: Psi'' = phi.
inline double psi2(double x, double two_h) {
  return 0.5 * std::pow(std::abs(x), two_h);
}

// First antiderivative of phi (odd): Psi1' = phi.
inline double psi1(double x, double h, double two_h) {
  const double a = h * std::pow(std::abs(x), two_h - 1.0);
  return x >= 0.0 ? a : -a;
}

}  // namespace

KernelMatrix::KernelMatrix(const TimeGrid& grid, HurstParameter H, Exec exec)
    : grid_(grid), H_(H) {
  const int n = grid_.node_count();
  const int m = grid_.cell_count();
  const double two_h = H_.two_h();

  weights_.resize(m, m);
  for_each_index(
      m,
      [&](std::int64_t i) {
        const double a1 = grid_.time(static_cast<int>(i));
        const double a2 = a1 + grid_.dt();
        for (int j = 0; j < m; ++j) {
          const double b1 = grid_.time(j);
          const double b2 = b1 + grid_.dt();
          weights_(i, j) = psi2(a2 - b1, two_h) + psi2(a1 - b2, two_h) -
                           psi2(a1 - b1, two_h) - psi2(a2 - b2, two_h);
        }
      },
      exec);

  cov_.resize(n, n);
  for_each_index(
      n,
      [&](std::int64_t i) {
        const double t = grid_.time(static_cast<int>(i));
        for (int j = 0; j < n; ++j) {
          const double s = grid_.time(j);
          cov_(i, j) = 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) -
                              std::pow(std::abs(t - s), two_h));
        }
      },
      exec);

  chol_ = semidefinite_cholesky(cov_);
}

double KernelMatrix::cell_mid(const Tabulation& v, int cell) const {
  return 0.5 * (v[cell] + v[cell + 1]);
}

double KernelMatrix::inner_product(const Tabulation& xi, const Tabulation& psi,
                                   double T) const {
  bool rounded = false;
  const int m = grid_.index_of(T, &rounded);
  if (rounded)
    throw std::invalid_argument("inner_product: T is not a grid node");
  if (static_cast<int>(xi.size()) < m + 1 ||
      static_cast<int>(psi.size()) < m + 1)
    throw std::invalid_argument("inner_product: tabulation does not cover T");
  std::vector<double> a(m), b(m);
  for (int i = 0; i < m; ++i) {
    a[i] = cell_mid(xi, i);
    b[i] = cell_mid(psi, i);
  }
  return inner_product_cells(a, b, T);
}

double KernelMatrix::inner_product_cells(const std::vector<double>& a,
                                         const std::vector<double>& b,
                                         double T) const {
  bool rounded = false;
  const int m = grid_.index_of(T, &rounded);
  if (rounded)
    throw std::invalid_argument("inner_product: T is not a grid node");
  if (static_cast<int>(a.size()) < m || static_cast<int>(b.size()) < m)
    throw std::invalid_argument("inner_product: cell values do not cover T");

  std::vector<double> row(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += weights_(i, j) * b[j];
    row[i] = a[i] * acc;
  }
  double total = 0.0;
  for (double r : row) total += r;
  return total;
}

double KernelMatrix::norm_sq(const Tabulation& xi, double T) const {
  return inner_product(xi, xi, T);
}

std::vector<double> KernelMatrix::norm_sq_profile(const Tabulation& xi) const {
  const int n = grid_.node_count();
  if (static_cast<int>(xi.size()) != n)
    throw std::invalid_argument("norm_sq_profile: tabulation size mismatch");
  std::vector<double> out(n, 0.0);
  // gamma_{i+1} = gamma_i + 2 sum_{j<i} W(i,j) m_i m_j + W(i,i) m_i^2
  for (int i = 0; i < n - 1; ++i) {
    const double mi = cell_mid(xi, i);
    double cross = 0.0;
    for (int j = 0; j < i; ++j) cross += weights_(i, j) * cell_mid(xi, j);
    out[i + 1] = out[i] + 2.0 * mi * cross + weights_(i, i) * mi * mi;
  }
  return out;
}

double KernelMatrix::sigma_hat_node(const Tabulation& sigma, int i) const {
  if (i == 0) return 0.0;  // empty integral
  const double h = H_.value();
  const double two_h = H_.two_h();
  const double ti = grid_.time(i);
  double acc = 0.0;
  for (int j = 0; j < i; ++j) {
    const double w = psi1(ti - grid_.time(j), h, two_h) -
                     psi1(ti - grid_.time(j + 1), h, two_h);
    acc += w * cell_mid(sigma, j);
  }
  return acc;
}

double KernelMatrix::sigma_hat(const Tabulation& sigma, double t) const {
  if (t < 0.0 || t > grid_.end() + 1e-12)
    throw std::out_of_range("sigma_hat: t outside grid");
  const double q = t / grid_.dt();
  const int lo = std::min(static_cast<int>(std::floor(q)),
                          grid_.node_count() - 1);
  const double frac = q - lo;
  if (frac < 1e-9) return sigma_hat_node(sigma, lo);
  const double a = sigma_hat_node(sigma, lo);
  const double b = sigma_hat_node(sigma, lo + 1);
  return a + frac * (b - a);
}

double KernelMatrix::norm_growth(const Tabulation& sigma, double t) const {
  const double q = t / grid_.dt();
  const int i = static_cast<int>(std::lround(q));
  const double sig = std::abs(q - i) < 1e-9
                         ? sigma[i]
                         : sigma[static_cast<int>(std::floor(q))];
  return 2.0 * sigma_hat(sigma, t) * sig;
}

double KernelMatrix::m_bound(const Tabulation& sigma) const {
  const double two_h = H_.two_h();
  double M = 0.0;
  for (int i = 1; i <= grid_.horizon_index(); ++i) {
    const double ratio = sigma_hat_node(sigma, i) / sigma[i];
    if (!(ratio > 0.0) || !std::isfinite(ratio))
      throw std::domain_error(
          "m_bound: sigma_hat/sigma nonpositive; sigma must be single-signed");
    const double q = ratio / std::pow(grid_.time(i), two_h - 1.0);
    M = std::max(M, std::max(q, 1.0 / q));
  }
  return std::max(M, 2.0 + 1e-6);
}

std::vector<double> KernelMatrix::cross_weights(const Tabulation& xi) const {
  const int m = grid_.cell_count();
  std::vector<double> out(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < i; ++j) acc += weights_(j, i) * cell_mid(xi, j);
    out[i] = acc;
  }
  return out;
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& A, double tol) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("cholesky: not square");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = A(j, j) - L.row(j).head(j).squaredNorm();
    if (d < -tol)
      throw std::runtime_error(
          "cholesky: matrix is not positive semidefinite within tolerance");
    d = d > 0.0 ? std::sqrt(d) : 0.0;
    L(j, j) = d;
    if (d == 0.0) continue;  // nearly coincident nodes: zero column
    for (Eigen::Index i = j + 1; i < n; ++i)
      L(i, j) = (A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / d;
  }
  return L;
}

}  // namespace mfabsde
