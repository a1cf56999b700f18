#include "dpt/patterns.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace dpt {

namespace {

constexpr double kColumnSumTol = 1e-12;
constexpr double kMinProbeSeparation = 1e-9;

void check_phase_sums(const RealVector& column, int phase_count, const char* what) {
  const Eigen::Index bins = column.size() / phase_count;
  for (int k = 0; k < phase_count; ++k) {
    const double s = column.segment(k * bins, bins).sum();
    if (std::abs(s - 1.0) > kColumnSumTol) {
      std::ostringstream os;
      os.precision(17);
      os << "patterns: " << what << " phase " << k << " sums to " << s;
      throw ShapeMismatch(os.str());
    }
  }
}

}  // namespace

ProbeSet::ProbeSet(std::vector<Complex> amplitudes, int dim)
    : amplitudes_(std::move(amplitudes)), dim_(dim) {
  if (size() < 2) throw InvalidArgument("ProbeSet: at least two probes are required");
  if (dim_ < 1) throw InvalidArgument("ProbeSet: dimension must be >= 1");
  for (int i = 0; i < size(); ++i) {
    for (int j = i + 1; j < size(); ++j) {
      if (std::abs(amplitudes_[i] - amplitudes_[j]) <= kMinProbeSeparation) {
        std::ostringstream os;
        os << "ProbeSet: probes " << i << " and " << j << " coincide";
        throw InvalidArgument(os.str());
      }
    }
  }
  projectors_.reserve(amplitudes_.size());
  for (const Complex a : amplitudes_) {
    projectors_.push_back(DensityMatrix::from_ket(coherent_ket(a, dim_)));
  }
  const ComplexMatrix& last = projectors_.back().matrix();
  directions_.reserve(amplitudes_.size() - 1);
  for (int i = 0; i + 1 < size(); ++i) {
    directions_.push_back(projectors_[i].matrix() - last);
  }
}

ProbeSet ProbeSet::prefix(int n) const {
  if (n < 2 || n > size()) throw InvalidArgument("ProbeSet::prefix: bad probe count");
  return ProbeSet(std::vector<Complex>(amplitudes_.begin(), amplitudes_.begin() + n), dim_);
}

PatternMatrix::PatternMatrix(RealMatrix probe_frequencies, RealVector signal,
                             int phase_count)
    : probes_(std::move(probe_frequencies)),
      signal_(std::move(signal)),
      phase_count_(phase_count) {
  if (probes_.cols() < 2) throw ShapeMismatch("patterns: at least two probe columns required");
  if (probes_.rows() != signal_.size()) {
    throw ShapeMismatch("patterns: signal length differs from probe outcome count");
  }
  if (phase_count_ < 1 || probes_.rows() % phase_count_ != 0) {
    throw ShapeMismatch("patterns: outcome count is not a multiple of phase_count");
  }
  for (Eigen::Index i = 0; i < probes_.cols(); ++i) {
    check_phase_sums(probes_.col(i), phase_count_, "probe column");
  }
  check_phase_sums(signal_, phase_count_, "signal");
  design_ = probes_.leftCols(probes_.cols() - 1).colwise() - probes_.col(probes_.cols() - 1);
}

PatternMatrix PatternMatrix::prefix(int n) const {
  if (n < 2 || n > probe_count()) throw InvalidArgument("PatternMatrix::prefix: bad probe count");
  return PatternMatrix(probes_.leftCols(n), signal_, phase_count_);
}

PatternMatrix build_patterns(std::span<const Histogram> probe_histograms,
                             const Histogram& signal_histogram) {
  const int m = signal_histogram.outcome_count();
  RealMatrix probes(m, static_cast<Eigen::Index>(probe_histograms.size()));
  for (std::size_t i = 0; i < probe_histograms.size(); ++i) {
    const Histogram& h = probe_histograms[i];
    if (h.outcome_count() != m || h.phase_count != signal_histogram.phase_count ||
        h.bin_count != signal_histogram.bin_count) {
      std::ostringstream os;
      os << "build_patterns: probe histogram " << i << " has a different outcome layout";
      throw ShapeMismatch(os.str());
    }
    probes.col(static_cast<Eigen::Index>(i)) = h.frequencies();
  }
  return PatternMatrix(std::move(probes), signal_histogram.frequencies(),
                       signal_histogram.phase_count);
}

ComplexMatrix rho_matrix_from_x(const RealVector& x, const ProbeSet& probes) {
  if (x.size() != probes.size() - 1) {
    throw ShapeMismatch("rho_from_x: weight vector must have N - 1 entries");
  }
  ComplexMatrix rho = probes.projector(probes.size() - 1).matrix();
  const auto& dirs = probes.directions();
  for (Eigen::Index i = 0; i < x.size(); ++i) rho += x(i) * dirs[i];
  // The trace is 1 by construction; large weights only add rounding drift.
  // Rescaling removes it without disturbing tiny graded entries.
  const double tr = rho.trace().real();
  if (tr > 0.0) rho /= tr;
  return rho;
}

DensityMatrix rho_from_x(const RealVector& x, const ProbeSet& probes) {
  return DensityMatrix(rho_matrix_from_x(x, probes));
}

RealVector predicted_frequencies(const RealVector& x, const PatternMatrix& patterns) {
  if (x.size() != patterns.probe_count() - 1) {
    throw ShapeMismatch("predicted_frequencies: weight vector must have N - 1 entries");
  }
  return patterns.last_column() + patterns.design() * x;
}

ObjectiveValue objective_and_gradient(const RealVector& x, const PatternMatrix& patterns) {
  const RealVector residual = patterns.signal() - predicted_frequencies(x, patterns);
  return {residual.squaredNorm(), -2.0 * patterns.design().transpose() * residual};
}

RealMatrix objective_hessian(const PatternMatrix& patterns) {
  const RealMatrix& a = patterns.design();
  RealMatrix h = 2.0 * a.transpose() * a;
  return 0.5 * (h + h.transpose());
}

}  // namespace dpt
