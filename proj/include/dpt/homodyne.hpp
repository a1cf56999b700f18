#pragma once

// Binned, finite-efficiency homodyne detection in the truncated Fock basis.
//
// Conventions: x = (a + a^dagger)/sqrt(2), so the vacuum quadrature variance
// is 1/2. Phases are theta_k = k pi / phase_count. Bins partition
// [x_min, x_max] into bin_count equal intervals; probability mass outside the
// range is dropped. Detector loss is the Gaussian kernel K(x|y) with mean
// sqrt(eta) y and variance (1 - eta)/2, which is the beam-splitter loss model.

#include <cstdint>
#include <vector>

#include "dpt/quantum_core.hpp"

namespace dpt {

struct MeasurementConfig {
  int dim = 8;
  int phase_count = 6;
  int bin_count = 61;
  double x_min = -6.0;
  double x_max = 6.0;
  double efficiency = 0.8;
  std::int64_t shots_per_phase = 200000;

  void validate() const;  // throws InvalidArgument

  int outcome_count() const { return phase_count * bin_count; }
  double bin_width() const { return (x_max - x_min) / bin_count; }
  double bin_left(int bin) const { return x_min + bin * bin_width(); }
  double bin_right(int bin) const { return x_min + (bin + 1) * bin_width(); }
  double bin_center(int bin) const { return x_min + (bin + 0.5) * bin_width(); }
  double phase(int k) const;
};

// Ordered outcome operators; outcome l = phase * bin_count + bin.
class PovmSet {
 public:
  PovmSet(MeasurementConfig config, std::vector<ComplexMatrix> elements);

  const MeasurementConfig& config() const { return config_; }
  int size() const { return static_cast<int>(elements_.size()); }
  const ComplexMatrix& element(int outcome) const { return elements_.at(outcome); }
  const std::vector<ComplexMatrix>& elements() const { return elements_; }

  int index(int phase, int bin) const { return phase * config_.bin_count + bin; }
  int phase_of(int outcome) const { return outcome / config_.bin_count; }
  int bin_of(int outcome) const { return outcome % config_.bin_count; }

  // max_{phase} || sum_bins Pi - I ||_max
  double completeness_residual() const;

 private:
  MeasurementConfig config_;
  std::vector<ComplexMatrix> elements_;
};

// <x|n> = H_n(x) exp(-x^2/2) / (pi^{1/4} sqrt(2^n n!)), via the normalized
// Hermite-function recurrence.
double quadrature_wavefunction(int n, double x);

// psi_0(x) .. psi_{count-1}(x) in one recurrence sweep.
RealVector hermite_functions(int count, double x);

// Real, phase-independent bin matrices R_b(m, n) = int dy w_b(y) psi_m psi_n,
// where w_b is the probability that the lossy detector reports bin b given
// ideal quadrature value y. Pi_{theta, b}(m, n) = exp(i (n - m) theta) R_b.
std::vector<RealMatrix> bin_kernels(const MeasurementConfig& config);

// Throws QuadratureError if the per-phase completeness residual exceeds 1e-6.
PovmSet build_povm(const MeasurementConfig& config);

// Born-rule probabilities Tr(Pi_l rho) with negative round-off clamped to zero
// and each phase renormalized to unit sum.
RealVector outcome_probabilities(const DensityMatrix& rho, const PovmSet& povm);

struct Histogram {
  int phase_count = 0;
  int bin_count = 0;
  std::int64_t shots_per_phase = 0;
  std::vector<std::int64_t> counts;  // outcome-major: phase * bin_count + bin

  int outcome_count() const { return static_cast<int>(counts.size()); }
  // counts / shots_per_phase; all zero when no shots were taken.
  RealVector frequencies() const;
};

// SplitMix64 finalizer applied to master + golden-ratio * (stream + 1).
// Phase k of sample_histogram draws from derive_seed(seed, k); experiment
// drivers derive per-state seeds from the master seed in the same way.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Independent multinomial draw per phase (sequential conditional binomials on
// a std::mt19937_64 stream). Throws NegativeProbability for entries below
// -1e-9 and InvalidArgument if a phase does not sum to 1 within 1e-9.
Histogram sample_histogram(const RealVector& probs, int phase_count,
                           std::int64_t shots_per_phase, std::uint64_t seed);

}  // namespace dpt
