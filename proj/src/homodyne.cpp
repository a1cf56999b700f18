#include "dpt/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>

namespace dpt {

namespace {

constexpr double kCompletenessTol = 1e-6;
constexpr double kProbabilityTol = 1e-9;
constexpr unsigned kGaussNodes = 16;
constexpr double kMaxPanel = 0.1;

// Gauss-Legendre rule on [-1, 1] as explicit (node, weight) pairs.
const std::vector<std::pair<double, double>>& legendre_rule() {
  static const std::vector<std::pair<double, double>> rule = [] {
    using Gauss = boost::math::quadrature::gauss<double, kGaussNodes>;
    std::vector<std::pair<double, double>> r;
    const auto& a = Gauss::abscissa();
    const auto& w = Gauss::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      r.emplace_back(a[i], w[i]);
      if (a[i] != 0.0) r.emplace_back(-a[i], w[i]);
    }
    return r;
  }();
  return rule;
}

// Calls f(y, weight) on a composite Gauss-Legendre grid covering [lo, hi].
template <class F>
void composite_rule(double lo, double hi, double max_panel, F&& f) {
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_panel)));
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (const auto& [node, weight] : legendre_rule()) {
      f(mid + 0.5 * h * node, 0.5 * h * weight);
    }
  }
}

// P(a < Z < b) for a standard normal Z, accurate in both tails.
double normal_interval(double a, double b) {
  constexpr double r = std::numbers::sqrt2;
  if (a >= 0.0) return 0.5 * (std::erfc(a / r) - std::erfc(b / r));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / r) - std::erfc(-a / r));
  return 1.0 - 0.5 * (std::erfc(-a / r) + std::erfc(b / r));
}

void accumulate_outer(RealMatrix& target, const RealVector& psi, double weight) {
  target.noalias() += weight * psi * psi.transpose();
}

}  // namespace

void MeasurementConfig::validate() const {
  std::ostringstream os;
  if (dim < 1) os << "dimension must be >= 1; ";
  if (phase_count < 1) os << "phase_count must be >= 1; ";
  if (bin_count < 2) os << "bin_count must be >= 2; ";
  if (!(x_min < x_max)) os << "quadrature range must satisfy x_min < x_max; ";
  if (!(efficiency > 0.0 && efficiency <= 1.0)) os << "efficiency must lie in (0, 1]; ";
  if (shots_per_phase < 0) os << "shots_per_phase must be >= 0; ";
  if (!os.str().empty()) throw InvalidArgument("measurement config: " + os.str());
}

double MeasurementConfig::phase(int k) const {
  return k * std::numbers::pi / phase_count;
}

PovmSet::PovmSet(MeasurementConfig config, std::vector<ComplexMatrix> elements)
    : config_(std::move(config)), elements_(std::move(elements)) {
  if (static_cast<int>(elements_.size()) != config_.outcome_count()) {
    throw ShapeMismatch("povm: element count does not match phase_count * bin_count");
  }
}

double PovmSet::completeness_residual() const {
  const int d = config_.dim;
  double worst = 0.0;
  for (int k = 0; k < config_.phase_count; ++k) {
    ComplexMatrix sum = ComplexMatrix::Zero(d, d);
    for (int b = 0; b < config_.bin_count; ++b) sum += elements_[index(k, b)];
    sum -= ComplexMatrix::Identity(d, d);
    worst = std::max(worst, sum.cwiseAbs().maxCoeff());
  }
  return worst;
}

RealVector hermite_functions(int count, double x) {
  RealVector psi = RealVector::Zero(std::max(count, 0));
  if (count <= 0) return psi;
  psi(0) = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (count > 1) psi(1) = std::numbers::sqrt2 * x * psi(0);
  for (int n = 1; n + 1 < count; ++n) {
    psi(n + 1) = std::sqrt(2.0 / (n + 1)) * x * psi(n) -
                 std::sqrt(static_cast<double>(n) / (n + 1)) * psi(n - 1);
  }
  return psi;
}

double quadrature_wavefunction(int n, double x) {
  if (n < 0) throw InvalidArgument("quadrature_wavefunction: n must be >= 0");
  return hermite_functions(n + 1, x)(n);
}

std::vector<RealMatrix> bin_kernels(const MeasurementConfig& config) {
  config.validate();
  const int d = config.dim;
  std::vector<RealMatrix> kernels(config.bin_count, RealMatrix::Zero(d, d));

  if (config.efficiency == 1.0) {
    // Ideal detector: the kernel is a delta, so integrate over each bin.
    for (int b = 0; b < config.bin_count; ++b) {
      composite_rule(config.bin_left(b), config.bin_right(b), kMaxPanel,
                     [&](double y, double w) {
                       accumulate_outer(kernels[b], hermite_functions(d, y), w);
                     });
    }
    return kernels;
  }

  const double gain = std::sqrt(config.efficiency);
  const double spread = std::sqrt(0.5 * (1.0 - config.efficiency));
  // Hermite functions below this index are negligible beyond the turning
  // point plus a generous Gaussian tail.
  const double y_max = std::sqrt(2.0 * d + 1.0) + 8.0;
  const double panel = std::min(kMaxPanel, 0.25 * spread);
  RealVector bin_weight(config.bin_count);
  composite_rule(-y_max, y_max, panel, [&](double y, double w) {
    const RealVector psi = hermite_functions(d, y);
    const double mean = gain * y;
    for (int b = 0; b < config.bin_count; ++b) {
      bin_weight(b) = normal_interval((config.bin_left(b) - mean) / spread,
                                      (config.bin_right(b) - mean) / spread);
    }
    for (int b = 0; b < config.bin_count; ++b) {
      if (bin_weight(b) > 1e-300) accumulate_outer(kernels[b], psi, w * bin_weight(b));
    }
  });
  return kernels;
}

PovmSet build_povm(const MeasurementConfig& config) {
  const std::vector<RealMatrix> kernels = bin_kernels(config);
  const int d = config.dim;
  std::vector<ComplexMatrix> elements;
  elements.reserve(config.outcome_count());
  for (int k = 0; k < config.phase_count; ++k) {
    const double theta = config.phase(k);
    for (int b = 0; b < config.bin_count; ++b) {
      ComplexMatrix e(d, d);
      for (int m = 0; m < d; ++m) {
        for (int n = 0; n < d; ++n) {
          e(m, n) = std::polar(kernels[b](m, n), (n - m) * theta);
        }
      }
      elements.push_back(std::move(e));
    }
  }
  PovmSet povm(config, std::move(elements));
  const double residual = povm.completeness_residual();
  if (!(residual <= kCompletenessTol)) {
    std::ostringstream os;
    os << "build_povm: completeness residual " << residual << " exceeds "
       << kCompletenessTol << "; widen the quadrature range or lower the dimension";
    throw QuadratureError(os.str());
  }
  return povm;
}

RealVector outcome_probabilities(const DensityMatrix& rho, const PovmSet& povm) {
  const MeasurementConfig& cfg = povm.config();
  if (rho.dim() != cfg.dim) {
    throw ShapeMismatch("outcome_probabilities: state and POVM dimensions differ");
  }
  const ComplexMatrix rho_t = rho.matrix().transpose();
  RealVector p(povm.size());
  for (int l = 0; l < povm.size(); ++l) {
    p(l) = std::max(0.0, rho_t.cwiseProduct(povm.element(l)).sum().real());
  }
  for (int k = 0; k < cfg.phase_count; ++k) {
    auto block = p.segment(k * cfg.bin_count, cfg.bin_count);
    const double total = block.sum();
    if (total > 0.0) block /= total;
  }
  return p;
}

RealVector Histogram::frequencies() const {
  RealVector f = RealVector::Zero(outcome_count());
  if (shots_per_phase <= 0) return f;
  for (int l = 0; l < outcome_count(); ++l) {
    f(l) = static_cast<double>(counts[l]) / static_cast<double>(shots_per_phase);
  }
  return f;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Histogram sample_histogram(const RealVector& probs, int phase_count,
                           std::int64_t shots_per_phase, std::uint64_t seed) {
  if (phase_count < 1 || probs.size() % phase_count != 0) {
    throw ShapeMismatch("sample_histogram: outcome count is not a multiple of phase_count");
  }
  if (shots_per_phase < 0) throw InvalidArgument("sample_histogram: negative shot count");
  const int bins = static_cast<int>(probs.size() / phase_count);

  Histogram h;
  h.phase_count = phase_count;
  h.bin_count = bins;
  h.shots_per_phase = shots_per_phase;
  h.counts.assign(probs.size(), 0);

  for (int k = 0; k < phase_count; ++k) {
    const auto block = probs.segment(static_cast<Eigen::Index>(k) * bins, bins);
    if (block.minCoeff() < -kProbabilityTol) {
      std::ostringstream os;
      os << "sample_histogram: probability " << block.minCoeff() << " in phase " << k;
      throw NegativeProbability(os.str());
    }
    const RealVector p = block.cwiseMax(0.0);
    const double total = p.sum();
    if (std::abs(total - 1.0) > kProbabilityTol) {
      std::ostringstream os;
      os << "sample_histogram: phase " << k << " probabilities sum to " << total;
      throw InvalidArgument(os.str());
    }

    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::int64_t remaining = shots_per_phase;
    double mass_left = total;
    for (int b = 0; b < bins && remaining > 0; ++b) {
      std::int64_t draw = remaining;
      if (b + 1 < bins) {
        const double q = mass_left > 0.0 ? std::clamp(p(b) / mass_left, 0.0, 1.0) : 1.0;
        std::binomial_distribution<std::int64_t> binom(remaining, q);
        draw = binom(rng);
      }
      h.counts[k * bins + b] = draw;
      remaining -= draw;
      mass_left -= p(b);
    }
  }
  return h;
}

}  // namespace dpt
