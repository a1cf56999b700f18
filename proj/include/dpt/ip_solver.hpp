#pragma once

// Primal-dual interior-point Newton method for
//
//   min_x F(x)  subject to  c(x) = [det rho(x)]^m >= 0,
//
// with Lagrangian L = F - lambda c and perturbed complementarity
// lambda c = mu. Each outer iteration performs a single Newton step on
//
//   [ H        -J^T ] [dx]   [ -g + lambda J^T ]
//   [ lambda J    c ] [dl] = [  mu - lambda c  ],   H = 2 A^T A - lambda B,
//
// backtracks until rho stays positive definite, lambda stays nonnegative and
// either the barrier function phi = F - mu log c or the KKT residual
// decreases sufficiently, then sets
// mu = beta lambda' c(x') once the KKT residual is below
// max(centering * mu, residual_tol).
//
// The primal part of the step is a Newton step on phi: eliminating the dual
// row gives (2 A^T A + lambda m c T) dx = -g + (mu / c) J = -grad phi. Armijo
// on phi therefore globalizes it. The residual itself is a poor merit here,
// since the linearized dual update lags when c is tiny and the stationarity
// term jumps even for good primal steps. Reducing mu only near the central
// path keeps lambda in step with x; reducing it every iteration leaves
// |g - lambda J| stuck at a fixed fraction of |g|.
//
// Constraint derivatives, with Gamma_i = rho^{-1} (sigma_i - sigma_N):
//   J_i  = m c Tr(Gamma_i)
//   B_ij = J_i J_j / c - m c Tr(Gamma_i Gamma_j)
//
// Cost per iteration (d = dimension, M = outcomes, N = probes): forming the
// objective gradient is O(N M); the barrier Hessian needs O(N d^3) to build
// the Gamma_i and O(N^2 d^2) for their pairwise traces; the Newton solve is
// O(N^3). Which term dominates depends on whether M, N d^2 or N^2 is largest.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpt/patterns.hpp"
#include "dpt/quantum_core.hpp"

namespace dpt {

struct SolverOptions {
  double mu0 = 0.01;
  double beta = 0.1;
  std::optional<double> m;  // barrier exponent; 1/d when unset
  double residual_tol = 1e-8;
  double mu_tol = 1e-10;
  int max_iterations = 500;
  double backtrack_factor = 0.5;
  double min_step = 1e-12;
  double armijo_c = 1e-4;
  double centering = 10.0;  // mu is reduced once residual <= centering * mu

  void validate() const;  // throws InvalidArgument
  double exponent(int dim) const { return m ? *m : 1.0 / dim; }
};

// c = [det rho]^m for rho PSD (eigenvalues >= -1e-12 are clamped to 0),
// otherwise 0. The determinant is the product of the eigenvalues.
double constraint_value(const DensityMatrix& rho, double m);

// Interior test used by the solver: rho is congruence-scaled to unit diagonal
// and its eigenvalues must exceed kInteriorThreshold. The scaling leaves
// positive definiteness and the Gamma_i traces unchanged while keeping graded
// Fock-basis matrices (tiny high-photon populations) well resolved.
inline constexpr double kInteriorThreshold = 1e-14;
bool is_interior(const ComplexMatrix& rho);

struct ConstraintDerivatives {
  double c = 0.0;
  double log_det = 0.0;
  RealVector jacobian;  // J, length N - 1
  RealMatrix hessian;   // B, symmetric (N - 1) x (N - 1)
  // m c T with T_ij = Tr(Gamma_i Gamma_j); equals J J^T / c - B and is PSD.
  RealMatrix curvature;
};

// Throws Boundary if rho(x) is not strictly positive definite.
ConstraintDerivatives constraint_derivatives(const RealVector& x, const ProbeSet& probes,
                                             double m);

struct NewtonStep {
  RealVector dx;
  double dlambda = 0.0;
  double regularization = 0.0;  // delta added to H, 0 if none was needed
};

// Solves the block system above. For c > 0 the dual row is eliminated and
// dx comes from the Schur complement H + (lambda / c) J J^T; otherwise the
// full block matrix is factored. A singular factorization is retried with
// delta I added to H, delta = 1e-12 (1 + |H|_max), growing by 10x up to 1e-6.
// Throws SingularSystem if that still fails.
NewtonStep newton_step(const RealMatrix& h, const RealVector& j, double c, double lambda,
                       const RealVector& g, double mu);

// Same step, given the Schur complement directly. The solver uses this with
// 2 A^T A + lambda m c T, which avoids forming J J^T / c and cancelling it.
NewtonStep newton_step_reduced(const RealMatrix& schur, const RealVector& j, double c,
                               double lambda, const RealVector& g, double mu);

// || (g - lambda J, lambda c - mu) ||_2
double kkt_residual(const RealVector& g, const RealVector& j, double c, double lambda,
                    double mu);

// Primal-dual iterate with everything the Newton step needs cached.
struct SolverState {
  RealVector x;
  double lambda = 0.0;
  double mu = 0.0;

  double objective = 0.0;
  RealVector gradient;
  ConstraintDerivatives constraint;
  double residual = 0.0;
};

// nullopt when rho(x) is not interior.
std::optional<SolverState> evaluate_state(const RealVector& x, double lambda, double mu,
                                          const PatternMatrix& patterns,
                                          const ProbeSet& probes, double m);

double kkt_residual(const SolverState& state);

struct LineSearchResult {
  double alpha = 1.0;
  int backtracks = 0;
  SolverState state;
};

// Barrier function F - mu log c; +inf outside the interior.
double barrier_value(const SolverState& state);

// Backtracking over alpha = 1, bf, bf^2, ... at fixed mu. Accepts when
// rho(x') is interior, lambda' >= 0 and either
//   phi(x') <= phi(x) + armijo_c alpha grad phi . dx   or
//   residual' <= (1 - armijo_c alpha) residual.
// The barrier test is skipped once -grad phi . dx <= 1e-12 |phi|.
// A zero step is accepted as is. Throws StepStalled once alpha drops below min_step.
LineSearchResult line_search(const SolverState& state, const NewtonStep& step,
                             const ProbeSet& probes, const PatternMatrix& patterns,
                             const SolverOptions& options);

enum class SolverStatus { Converged, MaxIterations, Stalled };

std::string to_string(SolverStatus status);

struct TraceRecord {
  int iteration = 0;
  double objective = 0.0;
  double residual = 0.0;
  double mu = 0.0;
  double alpha = 0.0;  // step that produced this iterate; 0 for the start
  double c = 0.0;
  double min_eigenvalue = 0.0;
};

class ConvergenceTrace {
 public:
  void append(const TraceRecord& record) { records_.push_back(record); }
  const std::vector<TraceRecord>& records() const { return records_; }
  int size() const { return static_cast<int>(records_.size()); }
  bool empty() const { return records_.empty(); }
  const TraceRecord& back() const { return records_.back(); }

  // k,F,log10_residual,mu,alpha,c,min_eig
  void write_csv(std::ostream& out) const;

 private:
  std::vector<TraceRecord> records_;
};

struct SolveResult {
  RealVector x;
  DensityMatrix rho;
  SolverStatus status = SolverStatus::MaxIterations;
  ConvergenceTrace trace;
  double lambda = 0.0;
  double mu = 0.0;
  int iterations = 0;
  std::string message;
};

// Throws InfeasibleStart if the uniform start x_i = 1/N is not interior.
SolveResult solve(const PatternMatrix& patterns, const ProbeSet& probes,
                  const SolverOptions& options = {});

}  // namespace dpt
