#include "dpt/ip_solver.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

namespace dpt {

namespace {

constexpr double kPsdClamp = 1e-12;
constexpr double kFirstRegularization = 1e-12;
constexpr double kLastRegularization = 1e-6;
constexpr double kBarrierRoundoff = 1e-12;

// Eigen-decomposition of D rho D with D = diag(rho)^{-1/2}.
struct ScaledSpectrum {
  RealVector scale;  // diag(rho)^{-1/2}
  RealVector values;
  ComplexMatrix vectors;
  double log_det = 0.0;  // log det rho
};

std::optional<ScaledSpectrum> scaled_spectrum(const ComplexMatrix& rho) {
  const RealVector diag = rho.diagonal().real();
  if (!diag.allFinite() || diag.minCoeff() <= 0.0) return std::nullopt;
  ScaledSpectrum out;
  out.scale = diag.cwiseSqrt().cwiseInverse();
  const ComplexMatrix scaled = out.scale.asDiagonal() * rho * out.scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(0.5 * (scaled + scaled.adjoint()));
  if (eig.info() != Eigen::Success) return std::nullopt;
  if (!(eig.eigenvalues()(0) > kInteriorThreshold)) return std::nullopt;
  out.values = eig.eigenvalues();
  out.vectors = eig.eigenvectors();
  out.log_det = out.values.array().log().sum() + diag.array().log().sum();
  return out;
}

std::optional<ConstraintDerivatives> try_constraint_derivatives(const ComplexMatrix& rho,
                                                                const ProbeSet& probes,
                                                                double m) {
  const auto spec = scaled_spectrum(rho);
  if (!spec) return std::nullopt;

  const int d = probes.dim();
  const auto& dirs = probes.directions();
  const auto n = static_cast<Eigen::Index>(dirs.size());

  // With rho = D^{-1} S D^{-1} and S = V W V^dagger, Gamma_i is similar to
  // W^{-1/2} V^dagger (D Delta_i D) V W^{-1/2} =: K_i, which is Hermitian.
  // Hence Tr Gamma_i = Tr K_i and Tr(Gamma_i Gamma_j) = <K_i, K_j>_HS.
  const RealVector inv_sqrt = spec->values.cwiseSqrt().cwiseInverse();
  const ComplexMatrix left = inv_sqrt.asDiagonal() * spec->vectors.adjoint() *
                             spec->scale.asDiagonal();
  ComplexMatrix stacked(static_cast<Eigen::Index>(d) * d, n);
  RealVector traces(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ComplexMatrix k = left * dirs[i] * left.adjoint();
    traces(i) = k.trace().real();
    stacked.col(i) = Eigen::Map<const ComplexVector>(k.data(), k.size());
  }
  RealMatrix gram = (stacked.adjoint() * stacked).real();
  gram = 0.5 * (gram + gram.transpose());

  ConstraintDerivatives out;
  out.log_det = spec->log_det;
  out.c = std::exp(m * spec->log_det);
  out.jacobian = m * out.c * traces;
  // J J^T / c - m c T, written so that no 1/c appears.
  out.curvature = m * out.c * gram;
  out.hessian = m * out.c * m * traces * traces.transpose() - out.curvature;
  return out;
}

}  // namespace

void SolverOptions::validate() const {
  std::ostringstream os;
  if (!(mu0 >= 0.0)) os << "mu0 must be >= 0; ";
  if (!(beta >= 0.0 && beta <= 1.0)) os << "beta must lie in [0, 1]; ";
  if (m && !(*m > 0.0 && *m < 1.0)) os << "m must lie in (0, 1); ";
  if (!(residual_tol > 0.0)) os << "residual_tol must be positive; ";
  if (!(mu_tol > 0.0)) os << "mu_tol must be positive; ";
  if (max_iterations < 0) os << "max_iterations must be >= 0; ";
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    os << "backtrack_factor must lie in (0, 1); ";
  }
  if (!(min_step > 0.0 && min_step <= 1.0)) os << "min_step must lie in (0, 1]; ";
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) os << "armijo_c must lie in (0, 1); ";
  if (!(centering > 0.0)) os << "centering must be positive; ";
  if (!os.str().empty()) throw InvalidArgument("solver options: " + os.str());
}

double constraint_value(const DensityMatrix& rho, double m) {
  if (!(m > 0.0 && m < 1.0)) throw InvalidArgument("constraint_value: m must lie in (0, 1)");
  const EigenDecomposition eig = eig_hermitian(rho.matrix());
  if (eig.values(0) < -kPsdClamp) return 0.0;
  double det = 1.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    det *= std::max(eig.values(i), 0.0);
  }
  return std::pow(det, m);
}

bool is_interior(const ComplexMatrix& rho) { return scaled_spectrum(rho).has_value(); }

ConstraintDerivatives constraint_derivatives(const RealVector& x, const ProbeSet& probes,
                                             double m) {
  auto out = try_constraint_derivatives(rho_matrix_from_x(x, probes), probes, m);
  if (!out) {
    throw Boundary("constraint_derivatives: rho(x) is not strictly positive definite");
  }
  return std::move(*out);
}

namespace {

[[noreturn]] void throw_singular(double delta) {
  std::ostringstream os;
  os << "newton_step: system singular even with regularization " << delta;
  throw SingularSystem(os.str());
}

bool accurate(const RealMatrix& k, const RealVector& z, const RealVector& rhs) {
  if (!z.allFinite()) return false;
  const double scale = k.cwiseAbs().maxCoeff() * z.cwiseAbs().maxCoeff() +
                       rhs.cwiseAbs().maxCoeff();
  return (k * z - rhs).cwiseAbs().maxCoeff() <= 1e-8 * scale;
}

void check_shapes(const RealMatrix& h, const RealVector& j, const RealVector& g) {
  const Eigen::Index n = h.rows();
  if (h.cols() != n || j.size() != n || g.size() != n) {
    throw ShapeMismatch("newton_step: inconsistent dimensions");
  }
}

// Factors the full block matrix; used when c = 0 and the dual row cannot be
// eliminated.
NewtonStep block_step(const RealMatrix& h, const RealVector& j, double c, double lambda,
                      const RealVector& g, double mu) {
  const Eigen::Index n = h.rows();
  // The dual unknown is solved as dlambda = scale * v so that its column is
  // commensurate with the primal block; this is a change of variables only.
  const double scale = lambda > 0.0 ? lambda : 1.0;
  RealVector rhs(n + 1);
  rhs.head(n) = -g + lambda * j;
  rhs(n) = mu - lambda * c;

  const double h_max = n > 0 ? h.cwiseAbs().maxCoeff() : 0.0;
  double delta = 0.0;
  for (double factor = kFirstRegularization;; factor *= 10.0) {
    RealMatrix k(n + 1, n + 1);
    k.topLeftCorner(n, n) = h;
    k.topLeftCorner(n, n).diagonal().array() += delta;
    k.topRightCorner(n, 1) = -scale * j;
    k.bottomLeftCorner(1, n) = lambda * j.transpose();
    k(n, n) = scale * c;

    Eigen::FullPivLU<RealMatrix> lu(k);
    if (lu.isInvertible()) {
      const RealVector z = lu.solve(rhs);
      if (z.allFinite()) return {z.head(n), scale * z(n), delta};
    }
    if (factor > kLastRegularization * (1.0 + 1e-9)) break;
    delta = factor * (1.0 + h_max);
  }
  throw_singular(delta);
}

}  // namespace

NewtonStep newton_step_reduced(const RealMatrix& schur, const RealVector& j, double c,
                               double lambda, const RealVector& g, double mu) {
  check_shapes(schur, j, g);
  if (!(c > 0.0)) throw InvalidArgument("newton_step_reduced: needs c > 0");
  const Eigen::Index n = schur.rows();
  // Second row: lambda J dx + c dl = mu - lambda c, so dl is explicit in dx.
  const double r2 = mu - lambda * c;
  const RealVector rhs = -g + lambda * j + (r2 / c) * j;

  const double s_max = n > 0 ? schur.cwiseAbs().maxCoeff() : 0.0;
  double delta = 0.0;
  for (double factor = kFirstRegularization;; factor *= 10.0) {
    RealMatrix k = schur;
    k.diagonal().array() += delta;
    Eigen::LDLT<RealMatrix> ldlt(k);
    if (ldlt.info() == Eigen::Success) {
      const RealVector dx = ldlt.solve(rhs);
      if (accurate(k, dx, rhs)) return {dx, (r2 - lambda * j.dot(dx)) / c, delta};
    }
    if (factor > kLastRegularization * (1.0 + 1e-9)) break;
    delta = factor * (1.0 + s_max);
  }
  throw_singular(delta);
}

NewtonStep newton_step(const RealMatrix& h, const RealVector& j, double c, double lambda,
                       const RealVector& g, double mu) {
  check_shapes(h, j, g);
  if (!(c > 0.0)) return block_step(h, j, c, lambda, g, mu);
  RealMatrix schur = h + (lambda / c) * j * j.transpose();
  schur = 0.5 * (schur + schur.transpose());
  return newton_step_reduced(schur, j, c, lambda, g, mu);
}

double kkt_residual(const RealVector& g, const RealVector& j, double c, double lambda,
                    double mu) {
  const double stationarity = (g - lambda * j).squaredNorm();
  const double complementarity = lambda * c - mu;
  return std::sqrt(stationarity + complementarity * complementarity);
}

std::optional<SolverState> evaluate_state(const RealVector& x, double lambda, double mu,
                                          const PatternMatrix& patterns,
                                          const ProbeSet& probes, double m) {
  auto constraint = try_constraint_derivatives(rho_matrix_from_x(x, probes), probes, m);
  if (!constraint) return std::nullopt;
  SolverState s;
  s.x = x;
  s.lambda = lambda;
  s.mu = mu;
  ObjectiveValue obj = objective_and_gradient(x, patterns);
  s.objective = obj.value;
  s.gradient = std::move(obj.gradient);
  s.constraint = std::move(*constraint);
  s.residual = kkt_residual(s);
  return s;
}

double kkt_residual(const SolverState& state) {
  return kkt_residual(state.gradient, state.constraint.jacobian, state.constraint.c,
                      state.lambda, state.mu);
}

double barrier_value(const SolverState& state) {
  if (!(state.constraint.c > 0.0)) return std::numeric_limits<double>::infinity();
  if (state.mu == 0.0) return state.objective;
  return state.objective - state.mu * std::log(state.constraint.c);
}

LineSearchResult line_search(const SolverState& state, const NewtonStep& step,
                             const ProbeSet& probes, const PatternMatrix& patterns,
                             const SolverOptions& options) {
  if (step.dx.size() != state.x.size()) throw ShapeMismatch("line_search: step size mismatch");
  if (step.dx.isZero(0.0) && step.dlambda == 0.0) return {1.0, 0, state};

  const double m = options.exponent(probes.dim());
  const double phi = barrier_value(state);
  // grad phi = g - (mu / c) J
  const double slope = state.mu == 0.0
                           ? state.gradient.dot(step.dx)
                           : (state.gradient - (state.mu / state.constraint.c) *
                                                   state.constraint.jacobian)
                                 .dot(step.dx);
  // Once the predicted decrease is at round-off level of phi the barrier
  // comparison is noise and only the residual test is used.
  const bool barrier_meaningful = -slope > kBarrierRoundoff * std::abs(phi);
  double alpha = 1.0;
  int backtracks = 0;
  int infeasible = 0;
  int negative_dual = 0;
  double last_phi = phi;
  while (alpha >= options.min_step) {
    const double lambda = state.lambda + alpha * step.dlambda;
    if (lambda >= 0.0) {
      auto trial = evaluate_state(state.x + alpha * step.dx, lambda, state.mu, patterns,
                                  probes, m);
      if (trial) {
        last_phi = barrier_value(*trial);
        // Far from the central path the barrier test drives progress; close
        // to it phi is flat to round-off and the residual test takes over.
        // A non-descent slope only happens through round-off.
        const bool barrier_ok =
            barrier_meaningful &&
            last_phi <= phi + options.armijo_c * alpha * std::min(slope, 0.0);
        const bool residual_ok =
            trial->residual <= (1.0 - options.armijo_c * alpha) * state.residual;
        if (barrier_ok || residual_ok) return {alpha, backtracks, std::move(*trial)};
      } else {
        ++infeasible;
      }
    } else {
      ++negative_dual;
    }
    alpha *= options.backtrack_factor;
    ++backtracks;
  }
  std::ostringstream os;
  os << "line_search: step length fell below " << options.min_step << " after "
     << backtracks << " backtracks (" << infeasible << " infeasible, " << negative_dual
     << " negative dual, barrier " << phi << " -> last trial " << last_phi
     << ", residual " << state.residual << ")";
  throw StepStalled(os.str());
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIterations: return "max_iterations";
    case SolverStatus::Stalled: return "stalled";
  }
  return "unknown";
}

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "k,F,log10_residual,mu,alpha,c,min_eig\n";
  out << std::setprecision(17);
  for (const TraceRecord& r : records_) {
    out << r.iteration << ',' << r.objective << ',' << std::log10(r.residual) << ','
        << r.mu << ',' << r.alpha << ',' << r.c << ',' << r.min_eigenvalue << '\n';
  }
}

SolveResult solve(const PatternMatrix& patterns, const ProbeSet& probes,
                  const SolverOptions& options) {
  options.validate();
  if (patterns.probe_count() != probes.size()) {
    throw ShapeMismatch("solve: pattern columns and probe count differ");
  }
  const int n_probes = probes.size();
  const double m = options.exponent(probes.dim());
  if (!(m > 0.0 && m < 1.0)) {
    throw InvalidArgument("solve: barrier exponent must lie in (0, 1); set m explicitly for d = 1");
  }

  const RealVector x0 = RealVector::Constant(n_probes - 1, 1.0 / n_probes);
  auto start = evaluate_state(x0, 0.0, options.mu0, patterns, probes, m);
  if (!start) {
    throw InfeasibleStart(
        "solve: the uniform probe mixture is not positive definite; enlarge or "
        "diversify the probe set so that it spans the reconstruction space");
  }
  SolverState state = std::move(*start);
  state.lambda = options.mu0 / state.constraint.c;
  state.residual = kkt_residual(state);

  const RealMatrix hess_f = objective_hessian(patterns);
  SolveResult result{RealVector(), probes.projector(n_probes - 1), SolverStatus::MaxIterations,
                     ConvergenceTrace(), 0.0, 0.0, 0, std::string()};
  double alpha = 0.0;

  for (int k = 0;; ++k) {
    result.trace.append({k, state.objective, state.residual, state.mu, alpha,
                         state.constraint.c,
                         min_eigenvalue(rho_matrix_from_x(state.x, probes))});
    result.iterations = k;
    if (state.residual <= options.residual_tol && state.mu <= options.mu_tol) {
      result.status = SolverStatus::Converged;
      break;
    }
    if (k >= options.max_iterations) {
      result.status = SolverStatus::MaxIterations;
      break;
    }

    // H + (lambda / c) J J^T = 2 A^T A + lambda m c T
    const RealMatrix schur = hess_f + state.lambda * state.constraint.curvature;
    const NewtonStep step = newton_step_reduced(schur, state.constraint.jacobian,
                                                state.constraint.c, state.lambda,
                                                state.gradient, state.mu);
    LineSearchResult ls;
    try {
      ls = line_search(state, step, probes, patterns, options);
    } catch (const StepStalled& e) {
      result.status = SolverStatus::Stalled;
      result.message = e.what();
      break;
    }
    alpha = ls.alpha;
    const double previous_mu = state.mu;
    state = std::move(ls.state);
    if (state.residual <= std::max(options.centering * previous_mu, options.residual_tol)) {
      const double complementarity = state.lambda * state.constraint.c;
      state.mu = complementarity > 0.0
                     ? options.beta * complementarity
                     : std::max(options.beta * previous_mu * 0.1, options.mu_tol);
      state.residual = kkt_residual(state);
    }
  }

  result.x = state.x;
  result.rho = rho_from_x(state.x, probes);
  result.lambda = state.lambda;
  result.mu = state.mu;
  return result;
}

}  // namespace dpt
