#include "dpt/quantum_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dpt {

double hermiticity_defect(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) {
    throw NotHermitian("matrix is not square");
  }
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

DensityMatrix::DensityMatrix(const ComplexMatrix& matrix) {
  if (matrix.rows() == 0 || matrix.rows() != matrix.cols()) {
    throw NotHermitian("density matrix must be square and non-empty");
  }
  const double defect = hermiticity_defect(matrix);
  if (!(defect <= tolerance::kHermitian)) {
    std::ostringstream os;
    os << "density matrix is not Hermitian (defect " << defect << ")";
    throw NotHermitian(os.str());
  }
  const double tr = matrix.trace().real();
  if (!(std::abs(tr - 1.0) <= tolerance::kTrace)) {
    std::ostringstream os;
    os.precision(17);
    os << "density matrix trace " << tr << " differs from 1";
    throw TraceError(os.str());
  }
  matrix_ = 0.5 * (matrix + matrix.adjoint());
}

DensityMatrix DensityMatrix::from_ket(const ComplexVector& ket) {
  const double norm = ket.norm();
  if (!(norm > 0.0)) {
    throw InvalidArgument("cannot build a state from a zero ket");
  }
  const ComplexVector unit = ket / norm;
  ComplexMatrix proj = unit * unit.adjoint();
  // Exact unit trace up to the last bit of the normalized diagonal.
  proj /= proj.trace().real();
  return DensityMatrix(proj);
}

EigenDecomposition eig_hermitian(const ComplexMatrix& a) {
  const double defect = hermiticity_defect(a);
  if (!(defect <= tolerance::kEigenInput)) {
    std::ostringstream os;
    os << "eig_hermitian: input not Hermitian (defect " << defect << ")";
    throw NotHermitian(os.str());
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (a + a.adjoint()));
  if (solver.info() != Eigen::Success) {
    throw NotHermitian("eig_hermitian: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

double min_eigenvalue(const ComplexMatrix& a) {
  return eig_hermitian(a).values(0);
}

ComplexMatrix sqrt_psd(const ComplexMatrix& a) {
  const EigenDecomposition eig = eig_hermitian(a);
  if (eig.values(0) < -tolerance::kNotPsd) {
    std::ostringstream os;
    os << "matrix is not PSD (min eigenvalue " << eig.values(0) << ")";
    throw NotPSD(os.str());
  }
  RealVector roots(eig.values.size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const double v = eig.values(i);
    roots(i) = v < tolerance::kEigenClamp ? 0.0 : std::sqrt(v);
  }
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}

ComplexVector coherent_ket(Complex alpha, int d) {
  if (d < 1) throw InvalidArgument("coherent_ket: dimension must be >= 1");
  ComplexVector ket(d);
  ket(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < d; ++n) {
    ket(n) = ket(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  }
  return ket;
}

DensityMatrix fock_mixture(int d, std::span<const double> diagonal,
                           std::span<const Coherence> coherences) {
  if (d < 1) throw InvalidArgument("fock_mixture: dimension must be >= 1");
  if (static_cast<int>(diagonal.size()) > d) {
    throw InvalidArgument("fock_mixture: more diagonal weights than levels");
  }
  ComplexMatrix m = ComplexMatrix::Zero(d, d);
  for (std::size_t n = 0; n < diagonal.size(); ++n) {
    m(n, n) = diagonal[n];
  }
  for (const Coherence& c : coherences) {
    if (c.row < 0 || c.col < 0 || c.row >= d || c.col >= d || c.row == c.col) {
      throw InvalidArgument("fock_mixture: coherence index out of range");
    }
    m(c.row, c.col) = c.value;
    m(c.col, c.row) = std::conj(c.value);
  }
  const double tr = m.trace().real();
  if (std::abs(tr - 1.0) > tolerance::kMixtureTrace) {
    std::ostringstream os;
    os << "fock_mixture: trace " << tr << " is not 1";
    throw TraceError(os.str());
  }
  // Remove the admissible rounding so the DensityMatrix invariant holds.
  for (int n = 0; n < d; ++n) m(n, n) /= tr;
  return DensityMatrix(m);
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) {
    throw ShapeMismatch("fidelity: dimension mismatch");
  }
  if (min_eigenvalue(sigma.matrix()) < -tolerance::kNotPsd) {
    throw NotPSD("fidelity: second argument is not PSD");
  }
  const ComplexMatrix root = sqrt_psd(rho.matrix());
  const ComplexMatrix inner = root * sigma.matrix() * root;
  const EigenDecomposition eig = eig_hermitian(0.5 * (inner + inner.adjoint()));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double v = eig.values(i);
    if (v > 0.0) sum += std::sqrt(v);
  }
  return sum;
}

double purity(const DensityMatrix& rho) {
  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
  return rho.matrix().squaredNorm();
}

ComplexMatrix displacement_matrix(Complex beta, int d) {
  if (d < 1) throw InvalidArgument("displacement_matrix: dimension must be >= 1");
  const double x = std::norm(beta);
  const double gauss = std::exp(-0.5 * x);
  ComplexMatrix out(d, d);
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      const int lo = std::min(m, n);
      const int k = std::abs(m - n);
      // sqrt(lo! / hi!)
      const double ratio =
          std::exp(0.5 * (std::lgamma(lo + 1.0) - std::lgamma(lo + k + 1.0)));
      const Complex base = m >= n ? beta : -std::conj(beta);
      const double lag = std::assoc_laguerre(static_cast<unsigned>(lo),
                                             static_cast<unsigned>(k), x);
      Complex power = 1.0;
      for (int i = 0; i < k; ++i) power *= base;
      out(m, n) = ratio * power * gauss * lag;
    }
  }
  return out;
}

ComplexMatrix displaced_parity(Complex alpha, int d) {
  ComplexMatrix out = displacement_matrix(2.0 * alpha, d);
  for (int n = 1; n < d; n += 2) out.col(n) *= -1.0;
  return out;
}

double wigner_at(const DensityMatrix& rho, Complex alpha) {
  const ComplexMatrix parity = displaced_parity(alpha, rho.dim());
  // Tr(rho O) = sum_{m,n} rho_nm O_mn
  return 2.0 * (rho.matrix().transpose().cwiseProduct(parity)).sum().real();
}

}  // namespace dpt
