#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfabsde/forward.hpp"
#include "mfabsde/kernel.hpp"
#include "mfabsde/paths.hpp"
#include "mfabsde/time_grid.hpp"

namespace mfabsde {

// Full driver signature f(t, x, E'[Y'], E'[Z'], Y, Z, E'[Y'(t+d)],
// E'[Z'(t+z)], Y(t+d), Z(t+z)); the bitmask below declares which
// arguments a generator actually reads.
struct DriverArgs {
  int node = 0;
  double t = 0.0;
  double x = 0.0;       // eta_t of the current particle
  double y_mean = 0.0;  // E'[Y'_t]
  double z_mean = 0.0;
  double y = 0.0;
  double z = 0.0;
  double y_shift_mean = 0.0;  // E'[Y'_{t+delta}]
  double z_shift_mean = 0.0;
  double y_shift = 0.0;  // anticipated pathwise value (conditioned on F_t
  double z_shift = 0.0;  // when the generator declares it)
};

enum GeneratorUses : unsigned {
  UsesX = 1u << 0,
  UsesY = 1u << 1,
  UsesZ = 1u << 2,
  UsesYMean = 1u << 3,
  UsesZMean = 1u << 4,
  UsesYShift = 1u << 5,
  UsesZShift = 1u << 6,
  UsesYShiftMean = 1u << 7,
  UsesZShiftMean = 1u << 8,
};

enum class GeneratorClass {
  Plain,
  MeanField,
  Anticipated,
  MeanFieldAnticipated,
  DeterministicAnticipated,
};

struct GeneratorSpec {
  std::function<double(const DriverArgs&)> f;
  double lipschitz_C = 0.0;
  GeneratorClass cls = GeneratorClass::Plain;
  unsigned uses = 0;
  // Apply E[. | F_t] to pathwise anticipated reads (the conditional form
  // of the anticipated terms); irrelevant for the *_mean arguments.
  bool condition_anticipated = true;
};

void validate_generator(const GeneratorSpec& gen);

struct TerminalSpec {
  std::function<double(double)> g;
  std::function<double(double)> h;
};

// Per-node polynomial regression u_i with Y = u_i(eta), Z = sigma u_i'.
struct NodeBasis {
  Eigen::VectorXd coeffs;  // in the centered/scaled variable
  double mu = 0.0;
  double scale = 1.0;
  int degree = 0;

  double eval(double eta) const;
  double eval_deriv(double eta) const;
};

struct SolutionField {
  TimeGrid grid;
  Eigen::MatrixXd Y;  // particle x node
  Eigen::MatrixXd Z;
  std::vector<NodeBasis> basis;  // nodes 0..horizon_index
  Tabulation sigma;
  Tabulation regression_rms;  // residual scale per node (0 on extension)
};

struct SolverConfig {
  int degree = 2;
  int picard_max = 25;
  double tol = 1e-6;    // relative, on dY + dZ between iterates
  double beta = -1.0;   // < 0: default 32 C^2 (L+1) M + 4/M
  Exec exec = Exec::OpenMP;
};

struct PicardDiagnostics {
  std::vector<double> dY, dZ, ratio;
  double beta = 0.0;
  double M = 0.0;
  double L = 0.0;
  int iterations = 0;
  bool converged = false;
};

class PicardError : public std::runtime_error {
 public:
  PicardError(const std::string& msg, PicardDiagnostics diag)
      : std::runtime_error(msg), diagnostics(std::move(diag)) {}
  PicardDiagnostics diagnostics;
};

struct Regression {
  Eigen::VectorXd fitted;
  NodeBasis basis;
  bool reduced = false;
  double rms = 0.0;
};

// Least-squares projection of targets onto {1, x, ..., x^d} in the
// centered/scaled regressor; rank deficiency reduces the degree.
Regression conditional_expectation(const Eigen::VectorXd& targets,
                                   const Eigen::VectorXd& regressors,
                                   int degree);

double mean_field_expectation(const Eigen::VectorXd& values);

// Fills Y = g(eta), Z = h(eta) on the nodes of [T, T+K].
void extend_terminal(const TerminalSpec& term, const PathEnsemble& eta,
                     SolutionField& field);

Eigen::VectorXd extract_z(const SolutionField& field,
                          const PathEnsemble& eta, int node);

void weighted_distance(const SolutionField& a, const SolutionField& b,
                       double beta, double two_h, double* dY, double* dZ);

SolutionField picard_solve(const GeneratorSpec& gen, const TerminalSpec& term,
                           const PathEnsemble& eta, const Tabulation& sigma,
                           const KernelMatrix& kernel, const DelaySpec& delays,
                           const SolverConfig& cfg,
                           PicardDiagnostics* diag = nullptr);

struct AprioriReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double slack = 0.0;  // 5 combined standard errors on the ratio
  bool pass = false;
};

// Both sides of the a-priori energy estimate at t = 0 for a plain driver
// f0(s) (deterministic tabulation), terminal g.
AprioriReport apriori_check(const SolutionField& field, const Tabulation& f0,
                            const TerminalSpec& term, const PathEnsemble& eta,
                            double beta, double M, double two_h);

double default_beta(double C, double L, double M);

}  // namespace mfabsde
