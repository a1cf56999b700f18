#pragma once

// Finite-dimensional quantum states in the truncated Fock basis.
//
// Matrices are indexed by photon number 0..d-1. Eigenvalues are always
// returned in ascending order. The Wigner function uses the pi-free
// normalization W(alpha) = 2 Tr[rho D(alpha) P D(alpha)^dagger], so that
// W(0) = 2 sum_n (-1)^n rho_nn.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dpt/errors.hpp"

namespace dpt {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

namespace tolerance {
inline constexpr double kHermitian = 1e-12;       // DensityMatrix invariant
inline constexpr double kTrace = 1e-12;           // DensityMatrix invariant
inline constexpr double kMixtureTrace = 1e-9;     // fock_mixture input check
inline constexpr double kEigenInput = 1e-10;      // eig_hermitian symmetry check
inline constexpr double kEigenClamp = 1e-12;      // clamp before square roots
inline constexpr double kNotPsd = 1e-8;           // hard PSD violation
}  // namespace tolerance

// Largest entrywise modulus of A - A^dagger.
double hermiticity_defect(const ComplexMatrix& a);

// Hermitian, unit-trace operator. Positivity is deliberately not part of the
// invariant: solver iterates and trial points may leave the PSD cone.
class DensityMatrix {
 public:
  // Throws NotHermitian / TraceError if the invariants do not hold. The stored
  // matrix is the exact Hermitian part of the input.
  explicit DensityMatrix(const ComplexMatrix& matrix);

  static DensityMatrix from_ket(const ComplexVector& ket);  // normalizes the ket

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const ComplexMatrix& matrix() const { return matrix_; }
  Complex operator()(int row, int col) const { return matrix_(row, col); }

 private:
  ComplexMatrix matrix_;
};

struct EigenDecomposition {
  RealVector values;     // ascending
  ComplexMatrix vectors; // columns
};

EigenDecomposition eig_hermitian(const ComplexMatrix& a);

double min_eigenvalue(const ComplexMatrix& a);

// Principal square root of a PSD matrix; eigenvalues below kEigenClamp are
// set to zero. Throws NotPSD for eigenvalues below -kNotPsd.
ComplexMatrix sqrt_psd(const ComplexMatrix& a);

// Fock amplitudes <n|alpha> = exp(-|alpha|^2/2) alpha^n / sqrt(n!), n < d.
// The truncated vector is not renormalized.
ComplexVector coherent_ket(Complex alpha, int d);

// Off-diagonal entry (row, col) = value; (col, row) receives conj(value).
struct Coherence {
  int row = 0;
  int col = 0;
  Complex value;
};

// Fock-diagonal weights (zero-padded to d) plus optional coherences.
DensityMatrix fock_mixture(int d, std::span<const double> diagonal,
                           std::span<const Coherence> coherences = {});

// Tr sqrt(sqrt(rho) sigma sqrt(rho)).
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

double purity(const DensityMatrix& rho);

// Closed-form matrix elements <m|D(beta)|n> restricted to m, n < d.
ComplexMatrix displacement_matrix(Complex beta, int d);

// Displaced parity D(alpha) P D(alpha)^dagger = D(2 alpha) P, restricted to d.
ComplexMatrix displaced_parity(Complex alpha, int d);

double wigner_at(const DensityMatrix& rho, Complex alpha);

}  // namespace dpt
