#pragma once

// Data patterns: probe responses, the affine weight parameterization of the
// reconstructed state, and the square-distance objective.
//
// The trace constraint is eliminated through the last probe:
//   rho(x) = sum_{i<N} x_i sigma_i + (1 - sum_i x_i) sigma_N,
//   fhat(x) = f^(N) + A x,  A(l, i) = f_l^(i) - f_l^(N).
// The objective F = |f - fhat|^2 is exactly quadratic with Hessian 2 A^T A.

#include <span>
#include <vector>

#include "dpt/homodyne.hpp"
#include "dpt/quantum_core.hpp"

namespace dpt {

// Coherent probe states. Truncated kets are renormalized so that every
// projector has unit trace in the working dimension.
class ProbeSet {
 public:
  ProbeSet(std::vector<Complex> amplitudes, int dim);

  int size() const { return static_cast<int>(amplitudes_.size()); }
  int dim() const { return dim_; }
  std::span<const Complex> amplitudes() const { return amplitudes_; }
  const DensityMatrix& projector(int xi) const { return projectors_.at(xi); }

  // sigma_i - sigma_N for i < N - 1 (zero-based), the directions of rho(x).
  const std::vector<ComplexMatrix>& directions() const { return directions_; }

  // First n probes, in order.
  ProbeSet prefix(int n) const;

 private:
  std::vector<Complex> amplitudes_;
  int dim_ = 0;
  std::vector<DensityMatrix> projectors_;
  std::vector<ComplexMatrix> directions_;
};

class PatternMatrix {
 public:
  // probe_frequencies: M x N, one column per probe; signal: length M.
  // Every column and the signal must sum to 1 per phase within 1e-12.
  PatternMatrix(RealMatrix probe_frequencies, RealVector signal, int phase_count);

  int outcome_count() const { return static_cast<int>(probes_.rows()); }
  int probe_count() const { return static_cast<int>(probes_.cols()); }
  int phase_count() const { return phase_count_; }

  const RealMatrix& probe_frequencies() const { return probes_; }
  const RealVector& signal() const { return signal_; }
  // M x (N - 1) reduced design matrix.
  const RealMatrix& design() const { return design_; }
  auto last_column() const { return probes_.col(probes_.cols() - 1); }

  // Keep only the first n probe columns; A is recomputed.
  PatternMatrix prefix(int n) const;

 private:
  RealMatrix probes_;
  RealVector signal_;
  int phase_count_;
  RealMatrix design_;
};

// Throws ShapeMismatch unless all histograms share the outcome layout.
PatternMatrix build_patterns(std::span<const Histogram> probe_histograms,
                             const Histogram& signal_histogram);

DensityMatrix rho_from_x(const RealVector& x, const ProbeSet& probes);

// Same affine map without the DensityMatrix checks, for trial points.
ComplexMatrix rho_matrix_from_x(const RealVector& x, const ProbeSet& probes);

RealVector predicted_frequencies(const RealVector& x, const PatternMatrix& patterns);

struct ObjectiveValue {
  double value = 0.0;
  RealVector gradient;
};

ObjectiveValue objective_and_gradient(const RealVector& x, const PatternMatrix& patterns);

RealMatrix objective_hessian(const PatternMatrix& patterns);

}  // namespace dpt
