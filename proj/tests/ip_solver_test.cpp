#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "dpt/homodyne.hpp"
#include "dpt/ip_solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dpt;

namespace {

MeasurementConfig measurement(int dim) {
  MeasurementConfig c;
  c.dim = dim;
  return c;
}

ProbeSet five_probes_d3() {
  return ProbeSet({Complex(0.4, 0.1), Complex(-0.6, 0.5), Complex(0.2, -0.9), Complex(1.0, 0.6),
                   Complex(-0.3, -0.2)},
                  3);
}

// Random x near the uniform mixture with rho(x) comfortably inside.
RealVector interior_point(const ProbeSet& probes, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.15);
  const int n = probes.size() - 1;
  for (;;) {
    RealVector x = RealVector::Constant(n, 1.0 / probes.size());
    for (int i = 0; i < n; ++i) x(i) += g(rng);
    if (min_eigenvalue(rho_matrix_from_x(x, probes)) > 1e-3) return x;
  }
}

DensityMatrix diag2(double p0, Complex coherence = 0.0) {
  const std::vector<double> d{p0, 1.0 - p0};
  const std::vector<Coherence> c{{0, 1, coherence}};
  return fock_mixture(2, d, c);
}

}  // namespace

TEST(ConstraintValue, Examples) {
  ComplexMatrix half = ComplexMatrix::Identity(2, 2) * 0.5;
  EXPECT_NEAR(constraint_value(DensityMatrix(half), 0.5), 0.5, 1e-15);
  EXPECT_EQ(constraint_value(diag2(1.0), 0.5), 0.0);
  EXPECT_NEAR(constraint_value(diag2(0.75), 0.5), std::sqrt(0.1875), 1e-15);
  EXPECT_NEAR(constraint_value(diag2(0.75), 0.5), 0.43301, 1e-5);
  ComplexMatrix indefinite = ComplexMatrix::Zero(2, 2);
  indefinite(0, 0) = 1.2;
  indefinite(1, 1) = -0.2;
  EXPECT_EQ(constraint_value(DensityMatrix(indefinite), 0.5), 0.0);
  EXPECT_THROW(constraint_value(diag2(0.5), 1.0), InvalidArgument);
  EXPECT_THROW(constraint_value(diag2(0.5), 0.0), InvalidArgument);
}

TEST(ConstraintDerivatives, MatchFiniteDifferencesOfLuDeterminant) {
  const ProbeSet probes = five_probes_d3();
  const double m = 1.0 / 3.0;
  std::mt19937_64 rng(2718);
  auto c_of = [&](const RealVector& y) { return oracle::lu_constraint(y, probes, m); };
  for (int trial = 0; trial < 20; ++trial) {
    const RealVector x = interior_point(probes, rng);
    const ConstraintDerivatives d = constraint_derivatives(x, probes, m);
    EXPECT_NEAR(d.c, c_of(x), 1e-12 * d.c);
    EXPECT_NEAR(d.c, constraint_value(rho_from_x(x, probes), m), 1e-13);

    const RealVector j_fd = oracle::fd_gradient(x, 1e-6, c_of);
    EXPECT_LE(oracle::relative_error(d.jacobian, j_fd), 1e-6) << "trial " << trial;

    auto j_of = [&](const RealVector& y) { return constraint_derivatives(y, probes, m).jacobian; };
    RealMatrix b_fd(4, 4);
    for (int i = 0; i < 4; ++i) {
      RealVector up = x;
      RealVector down = x;
      up(i) += 1e-6;
      down(i) -= 1e-6;
      b_fd.col(i) = (j_of(up) - j_of(down)) / 2e-6;
    }
    EXPECT_LE(oracle::relative_error(d.hessian, b_fd), 1e-5) << "trial " << trial;
    // Independent second derivatives straight from the LU determinant.
    EXPECT_LE(oracle::relative_error(d.hessian, oracle::fd_hessian(x, 1e-4, c_of)), 1e-5);
    EXPECT_LE((d.hessian - d.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-10);

    const RealMatrix jjt = d.jacobian * d.jacobian.transpose() / d.c;
    EXPECT_LE(oracle::relative_error(d.curvature, jjt - d.hessian), 1e-10);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<RealMatrix>(d.curvature).eigenvalues().minCoeff(),
              -1e-12 * d.curvature.norm());
  }
}

TEST(ConstraintDerivatives, OneDimensionalSpaceIsFlat) {
  const ProbeSet probes({Complex(0.3), Complex(-0.7, 0.2), Complex(0.0, 1.1)}, 1);
  const ConstraintDerivatives d = constraint_derivatives(RealVector::Constant(2, 0.2), probes, 0.5);
  EXPECT_NEAR(d.c, 1.0, 1e-15);
  EXPECT_LE(d.jacobian.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(d.hessian.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ConstraintDerivatives, BoundaryIsRejected) {
  const ProbeSet probes = five_probes_d3();
  // x = e_1 puts all weight on a pure probe.
  RealVector x = RealVector::Zero(4);
  x(0) = 1.0;
  EXPECT_THROW(constraint_derivatives(x, probes, 1.0 / 3.0), Boundary);
  EXPECT_FALSE(is_interior(rho_matrix_from_x(x, probes)));
  EXPECT_TRUE(is_interior(rho_matrix_from_x(RealVector::Constant(4, 0.2), probes)));
}

TEST(NewtonStep, HandSolvedTwoByTwo) {
  const NewtonStep s = newton_step(RealMatrix::Constant(1, 1, 2.0), RealVector::Constant(1, 1.0),
                                   0.5, 1.0, RealVector::Constant(1, 0.5), 0.05);
  EXPECT_NEAR(s.dx(0), -0.1, 1e-14);
  EXPECT_NEAR(s.dlambda, -0.7, 1e-14);
  EXPECT_EQ(s.regularization, 0.0);
}

TEST(NewtonStep, StationaryPointGivesZeroStep) {
  const RealVector j{{0.3, -0.2, 0.5}};
  const double lambda = 2.0;
  const double c = 0.4;
  const RealMatrix h = RealMatrix::Identity(3, 3) * 3.0;
  const NewtonStep s = newton_step(h, j, c, lambda, lambda * j, lambda * c);
  EXPECT_LE(s.dx.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(std::abs(s.dlambda), 1e-15);
}

TEST(NewtonStep, SolvesTheBlockSystem) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 6;
    RealMatrix r(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) r(i, k) = g(rng);
    const RealMatrix h = r * r.transpose() + 0.1 * RealMatrix::Identity(n, n);
    RealVector j(n), grad(n);
    for (int i = 0; i < n; ++i) {
      j(i) = g(rng);
      grad(i) = g(rng);
    }
    const double lambda = std::abs(g(rng)) + 0.1;
    const double mu = 0.01;
    // c = 0 exercises the full block factorization.
    for (double c : {0.7, 1e-3, 0.0}) {
      const NewtonStep s = newton_step(h, j, c, lambda, grad, mu);
      RealMatrix block(n + 1, n + 1);
      block.topLeftCorner(n, n) = h;
      block.topRightCorner(n, 1) = -j;
      block.bottomLeftCorner(1, n) = lambda * j.transpose();
      block(n, n) = c;
      RealVector rhs(n + 1);
      rhs.head(n) = -grad + lambda * j;
      rhs(n) = mu - lambda * c;
      RealVector sol(n + 1);
      sol.head(n) = s.dx;
      sol(n) = s.dlambda;
      EXPECT_LE((block * sol - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()))
          << "n=" << n << " c=" << c;
    }
  }
}

TEST(NewtonStep, RankDeficientHessianIsRegularized) {
  // H = 0 and c = 0 make the block matrix singular for n >= 2.
  const RealMatrix h = RealMatrix::Zero(3, 3);
  const RealVector j{{1.0, 0.0, 0.0}};
  const NewtonStep s = newton_step(h, j, 0.0, 1.0, RealVector{{0.1, 0.2, 0.3}}, 0.01);
  EXPECT_GT(s.regularization, 0.0);
  EXPECT_LE(s.regularization, 1e-6);
  EXPECT_TRUE(s.dx.allFinite());
}

TEST(NewtonStep, ShapeErrors) {
  EXPECT_THROW(newton_step(RealMatrix::Identity(2, 2), RealVector::Zero(3), 0.5, 1.0,
                           RealVector::Zero(2), 0.1),
               ShapeMismatch);
  EXPECT_THROW(newton_step_reduced(RealMatrix::Identity(2, 2), RealVector::Zero(2), 0.0, 1.0,
                                   RealVector::Zero(2), 0.1),
               InvalidArgument);
}

TEST(KktResidual, Examples) {
  const RealVector g{{1.0, 0.0}};
  EXPECT_NEAR(kkt_residual(g, RealVector{{1.0, 0.0}}, 0.3, 1.0, 0.3), 0.0, 1e-15);
  EXPECT_NEAR(kkt_residual(g, RealVector{{0.0, 0.0}}, 0.3, 0.0, 0.1), std::sqrt(1.01), 1e-15);
  EXPECT_NEAR(kkt_residual(g, RealVector{{0.0, 0.0}}, 0.3, 0.0, 0.1), 1.00499, 1e-5);
}

class LineSearchFixture : public ::testing::Test {
 protected:
  LineSearchFixture()
      : povm_(build_povm(measurement(2))),
        probes_({Complex(0.5, 0.0), Complex(-0.3, 0.6), Complex(-0.2, -0.7)}, 2),
        patterns_(oracle::exact_patterns(probes_, povm_, diag2(0.7, Complex(0.1, 0.05)))) {}

  SolverState start(double mu) const {
    const RealVector x = RealVector::Constant(2, 1.0 / 3.0);
    SolverState s = *evaluate_state(x, 0.0, mu, patterns_, probes_, 0.5);
    s.lambda = mu / s.constraint.c;
    s.residual = kkt_residual(s);
    return s;
  }

  NewtonStep solver_step(const SolverState& s) const {
    const RealMatrix schur = objective_hessian(patterns_) + s.lambda * s.constraint.curvature;
    return newton_step_reduced(schur, s.constraint.jacobian, s.constraint.c, s.lambda,
                               s.gradient, s.mu);
  }

  // The line-search acceptance rule: barrier Armijo or residual decrease.
  static bool accepted(const SolverState& before, const NewtonStep& step,
                       const LineSearchResult& r, const SolverOptions& opt) {
    const double slope =
        (before.gradient - (before.mu / before.constraint.c) * before.constraint.jacobian)
            .dot(step.dx);
    const bool barrier_ok = barrier_value(r.state) <=
                            barrier_value(before) + opt.armijo_c * r.alpha * std::min(slope, 0.0);
    const bool residual_ok =
        r.state.residual <= (1.0 - opt.armijo_c * r.alpha) * before.residual;
    return barrier_ok || residual_ok;
  }

  PovmSet povm_;
  ProbeSet probes_;
  PatternMatrix patterns_;
};

TEST_F(LineSearchFixture, ZeroStepLeavesStateUnchanged) {
  const SolverState s = start(0.01);
  const NewtonStep zero{RealVector::Zero(2), 0.0, 0.0};
  const LineSearchResult r = line_search(s, zero, probes_, patterns_, SolverOptions{});
  EXPECT_EQ(r.alpha, 1.0);
  EXPECT_EQ(r.backtracks, 0);
  EXPECT_EQ(r.state.x, s.x);
  EXPECT_EQ(r.state.residual, s.residual);
}

TEST_F(LineSearchFixture, FullNewtonStepIsAcceptedFromTheCenter) {
  const SolverState s = start(0.01);
  const LineSearchResult r = line_search(s, solver_step(s), probes_, patterns_, SolverOptions{});
  EXPECT_EQ(r.alpha, 1.0);
  EXPECT_LT(r.state.residual, s.residual);
  EXPECT_TRUE(is_interior(rho_matrix_from_x(r.state.x, probes_)));
}

TEST_F(LineSearchFixture, OvershootingStepBacktracksIntoTheInterior) {
  const SolverState s = start(0.01);
  NewtonStep step = solver_step(s);
  step.dx *= 200.0;
  step.dlambda *= 200.0;
  // The full step leaves the PSD set.
  EXPECT_FALSE(is_interior(rho_matrix_from_x(s.x + step.dx, probes_)));
  const SolverOptions opt;
  const LineSearchResult r = line_search(s, step, probes_, patterns_, opt);
  EXPECT_LT(r.alpha, 1.0);
  EXPECT_GT(r.backtracks, 0);
  EXPECT_TRUE(is_interior(rho_matrix_from_x(r.state.x, probes_)));
  EXPECT_GE(r.state.lambda, 0.0);
  EXPECT_TRUE(accepted(s, step, r, opt));
}

TEST_F(LineSearchFixture, AscentDirectionStalls) {
  const SolverState s = start(0.01);
  NewtonStep step = solver_step(s);
  step.dx *= -1.0;
  step.dlambda = 0.0;
  SolverOptions opt;
  opt.min_step = 1e-3;
  EXPECT_THROW(line_search(s, step, probes_, patterns_, opt), StepStalled);
}

TEST(Solve, InteriorOptimumMatchesNormalEquations) {
  const PovmSet povm = build_povm(measurement(2));
  const ProbeSet probes({Complex(0.5, 0.1), Complex(-0.4, 0.6), Complex(-0.3, -0.8), Complex(1.0, -0.2)}, 2);
  const PatternMatrix p = oracle::exact_patterns(probes, povm, diag2(0.65, Complex(0.1, -0.15)));
  const RealMatrix& a = p.design();
  const RealVector oracle_x = (a.transpose() * a).ldlt().solve(a.transpose() * (p.signal() - p.last_column()));
  ASSERT_GT(min_eigenvalue(rho_matrix_from_x(oracle_x, probes)), 0.05);

  const SolveResult r = solve(p, probes);
  EXPECT_EQ(r.status, SolverStatus::Converged) << r.message;
  EXPECT_LE(objective_and_gradient(r.x, p).value, 1e-12);
  EXPECT_LE((r.x - oracle_x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, SignalEqualToProbeRecoversProbe) {
  const PovmSet povm = build_povm(measurement(3));
  const ProbeSet probes = five_probes_d3();
  const PatternMatrix p = oracle::exact_patterns(probes, povm, probes.projector(0));
  const SolveResult r = solve(p, probes);
  EXPECT_NE(r.status, SolverStatus::Stalled) << r.message;
  EXPECT_GE(fidelity(probes.projector(0), r.rho), 1.0 - 1e-3);
}

TEST(Solve, AgreesWithGridSearchOnQubits) {
  const PovmSet povm = build_povm(measurement(2));
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> radius(0.2, 1.2);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Complex> amps;
    for (int i = 0; i < 3; ++i) amps.push_back(std::polar(radius(rng), angle(rng)));
    const ProbeSet probes(amps, 2);
    const PatternMatrix p = oracle::exact_patterns(probes, povm, dpt::testing::random_state(2, rng));
    const oracle::GridMinimum grid = oracle::grid_minimum(p, probes);
    ASSERT_GT(grid.feasible_points, 100);
    const SolveResult r = solve(p, probes);
    const double value = objective_and_gradient(r.x, p).value;
    EXPECT_LE(value, grid.value + 1e-6) << "trial " << trial;
    EXPECT_NEAR(value, oracle::grid_minimum(p, probes, 10).value, 1e-6) << "trial " << trial;
    EXPECT_GE(min_eigenvalue(r.rho.matrix()), -1e-10);
  }
}

TEST(Solve, UniformStartMustBeInterior) {
  const PovmSet povm = build_povm(measurement(3));
  const ProbeSet probes({Complex(0.3), Complex(-0.5, 0.4)}, 3);
  const PatternMatrix p = oracle::exact_patterns(probes, povm, probes.projector(0));
  EXPECT_THROW(solve(p, probes), InfeasibleStart);
}

TEST(Solve, RejectsInvalidOptionsAndShapes) {
  const PovmSet povm = build_povm(measurement(3));
  const ProbeSet probes = five_probes_d3();
  const PatternMatrix p = oracle::exact_patterns(probes, povm, probes.projector(1));
  SolverOptions bad;
  bad.beta = 1.5;
  EXPECT_THROW(solve(p, probes, bad), InvalidArgument);
  bad = SolverOptions{};
  bad.m = 1.0;
  EXPECT_THROW(solve(p, probes, bad), InvalidArgument);
  EXPECT_THROW(solve(p.prefix(4), probes, SolverOptions{}), ShapeMismatch);

  const ProbeSet scalar({Complex(0.1), Complex(0.2)}, 1);
  const PatternMatrix flat(RealMatrix::Constant(4, 2, 0.25), RealVector::Constant(4, 0.25), 1);
  EXPECT_THROW(solve(flat, scalar), InvalidArgument);
  SolverOptions explicit_m;
  explicit_m.m = 0.5;
  EXPECT_NO_THROW(solve(flat, scalar, explicit_m));
}

TEST(Solve, ConvergedRunSatisfiesKktAndStaysFeasible) {
  const PovmSet povm = build_povm(measurement(3));
  const ProbeSet probes = five_probes_d3();
  const std::vector<double> diag{0.5, 0.3, 0.2};
  const PatternMatrix p = oracle::exact_patterns(probes, povm, fock_mixture(3, diag));
  const SolverOptions opt;
  const SolveResult r = solve(p, probes, opt);
  ASSERT_EQ(r.status, SolverStatus::Converged) << r.message;

  const ObjectiveValue obj = objective_and_gradient(r.x, p);
  const ConstraintDerivatives d = constraint_derivatives(r.x, probes, opt.exponent(3));
  EXPECT_LE((obj.gradient - r.lambda * d.jacobian).norm(), opt.residual_tol);
  EXPECT_LE(r.lambda * d.c, opt.mu_tol + opt.residual_tol);
  EXPECT_GE(r.lambda, 0.0);
  EXPECT_NEAR(r.rho.matrix().trace().real(), 1.0, 1e-12);
  EXPECT_GE(min_eigenvalue(r.rho.matrix()), -1e-10);

  ASSERT_EQ(r.trace.size(), r.iterations + 1);
  for (const TraceRecord& rec : r.trace.records()) {
    EXPECT_GT(rec.min_eigenvalue, 0.0) << "iteration " << rec.iteration;
    EXPECT_GT(rec.c, 0.0);
    EXPECT_GT(rec.mu, 0.0);
  }
  EXPECT_EQ(r.trace.records().front().alpha, 0.0);
  EXPECT_LE(r.trace.back().residual, opt.residual_tol);
}

TEST(Solve, DeterministicRepeatedRuns) {
  const PovmSet povm = build_povm(measurement(3));
  const ProbeSet probes = five_probes_d3();
  std::mt19937_64 rng(5);
  const PatternMatrix p = oracle::exact_patterns(probes, povm, dpt::testing::random_state(3, rng));
  const SolveResult a = solve(p, probes);
  const SolveResult b = solve(p, probes);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(ConvergenceTraceCsv, HeaderAndRows) {
  ConvergenceTrace t;
  t.append({0, 1.5, 1e-3, 0.01, 0.0, 0.2, 0.1});
  t.append({1, 0.5, 1e-6, 0.001, 1.0, 0.1, 0.05});
  std::ostringstream os;
  t.write_csv(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,F,log10_residual,mu,alpha,c,min_eig");
  std::getline(in, line);
  std::vector<double> cells;
  std::istringstream row(line);
  for (std::string cell; std::getline(row, cell, ',');) cells.push_back(std::stod(cell));
  ASSERT_EQ(cells.size(), 7u);
  EXPECT_EQ(cells[0], 0.0);
  EXPECT_EQ(cells[1], 1.5);
  EXPECT_NEAR(cells[2], -3.0, 1e-14);
  EXPECT_EQ(cells[6], 0.1);
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(SolverStatusNames, Strings) {
  EXPECT_EQ(to_string(SolverStatus::Converged), "converged");
  EXPECT_EQ(to_string(SolverStatus::MaxIterations), "max_iterations");
  EXPECT_EQ(to_string(SolverStatus::Stalled), "stalled");
}
