#pragma once

// End-to-end simulated homodyne data-pattern tomography: probe layout, data
// simulation, reconstruction for a list of probe counts, purity sweeps and
// Wigner-function grids.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpt/homodyne.hpp"
#include "dpt/ip_solver.hpp"
#include "dpt/patterns.hpp"
#include "dpt/quantum_core.hpp"

namespace dpt {

struct SpiralParams {
  double delta_r = 0.0175;          // radial step per probe
  double delta_phi = 0.5;           // angular step per probe, radians
  std::optional<double> offset;     // first-probe radius; delta_r when unset

  double first_radius() const { return offset ? *offset : delta_r; }
  void validate() const;
};

enum class ProbeLayout { Spiral, Grid };

// alpha_k = (offset + (k-1) delta_r) exp(i (k-1) delta_phi), k = 1..n.
std::vector<Complex> spiral_amplitudes(int n, const SpiralParams& params);

// Points of the square lattice spacing * (i + i j), ordered by radius and
// then by angle in [0, 2 pi).
std::vector<Complex> grid_amplitudes(int n, double spacing);

ProbeSet spiral_probes(int n, const SpiralParams& params, int dim);

struct TrueStateSpec {
  std::vector<double> diagonal{0.4, 0.6};
  std::vector<Coherence> coherences;

  DensityMatrix build(int dim) const;
};

// The purity-sweep family 0.5|0><0| + 0.5|1><1| + gamma (|0><1| + |1><0|).
// Throws NotPSD for gamma outside [-0.5, 0.5].
TrueStateSpec coherent_superposition_family(double gamma);

struct ExperimentConfig {
  int dimension = 8;
  TrueStateSpec true_state;
  MeasurementConfig measurement;
  ProbeLayout probe_layout = ProbeLayout::Spiral;
  SpiralParams spiral;
  double grid_spacing = 0.25;
  std::vector<int> probe_counts{13, 15, 16, 25, 30, 40, 50, 60};
  SolverOptions solver;
  std::uint64_t seed = 1;
  std::string output_directory = "dpt_output";
  // Use exact outcome probabilities instead of sampled histograms.
  bool exact_probabilities = false;
  double wigner_half_width = 3.0;
  double wigner_step = 0.1;

  // Throws ConfigError. Also enforces N < M for every probe count.
  void validate() const;
  int max_probe_count() const;
  MeasurementConfig measurement_for_run() const;  // measurement with dim = dimension
};

std::vector<Complex> probe_amplitudes(const ExperimentConfig& config, int n);

// Everything measured in one simulated experiment.
struct SimulatedData {
  DensityMatrix true_state;
  std::vector<Complex> amplitudes;       // largest probe set; prefixes give smaller ones
  std::optional<Histogram> signal_histogram;  // absent in exact mode
  std::vector<Histogram> probe_histograms;
  RealMatrix probe_frequencies;          // M x N_max
  RealVector signal_frequencies;
};

// Signal histogram uses stream derive_seed(seed, 0); probe k (1-based) uses
// derive_seed(seed, k). Probe k's data is therefore the same for every
// probe count.
SimulatedData simulate(const ExperimentConfig& config, const PovmSet& povm,
                       const DensityMatrix& true_state, std::uint64_t seed);

struct ProbeRunRecord {
  int probe_count = 0;
  bool solved = false;
  std::string error;
  SolverStatus status = SolverStatus::MaxIterations;
  int iterations = 0;
  double fidelity = 0.0;
  double w0 = 0.0;
  double purity = 0.0;
  double min_eigenvalue = 0.0;
  double final_residual = 0.0;
  double wall_seconds = 0.0;
  std::optional<SolveResult> solution;
};

struct RunReport {
  std::vector<ProbeRunRecord> runs;
  std::vector<std::filesystem::path> artifacts;
  double true_w0 = 0.0;
};

// Reconstructs the state with the first n probes of data.
ProbeRunRecord reconstruct(const SimulatedData& data, int n, int phase_count, int dim,
                           const SolverOptions& options);

// Solves every configured probe count on data, in parallel. Solver failures
// are recorded per probe count.
RunReport reconstruct_all(const ExperimentConfig& config, const SimulatedData& data);

// probes.csv, wigner_true.csv, signal_histogram.csv (sampled data only),
// w0_vs_probes.csv, and per solved run trace_NXXX.csv, rho_NXXX.csv and
// wigner_NXXX.csv, followed by manifest.json. Only the manifest carries wall
// times, so the CSV files are identical across reruns.
void write_run_outputs(const ExperimentConfig& config, const SimulatedData& data,
                       RunReport& report);

// simulate + reconstruct_all, plus write_run_outputs when write_outputs is set.
RunReport run_experiment(const ExperimentConfig& config, bool write_outputs = true);

// A sampled data set on disk: config.json, probes.csv, signal_histogram.csv
// and probe_histograms/probe_NNN.csv (1-based, in probe order).
void write_data_set(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const SimulatedData& data);

struct DataSet {
  ExperimentConfig config;
  SimulatedData data;
};

// Throws ConfigError for a bad config.json and IoError / ShapeMismatch for
// missing or inconsistent tables.
DataSet read_data_set(const std::filesystem::path& dir);

struct PurityRow {
  double gamma = 0.0;
  double purity = 0.0;
  double mean_fidelity = 0.0;
  double std_fidelity = 0.0;
  int runs = 0;
  int failures = 0;
};

// For each gamma, runs_per_gamma independent simulations with the largest
// probe count of the config. Run r of gamma index g uses seed
// derive_seed(derive_seed(config.seed, 1000 + g), r).
std::vector<PurityRow> sweep_purity(const ExperimentConfig& config,
                                    const std::vector<double>& gammas, int runs_per_gamma);

struct WignerSample {
  double re = 0.0;
  double im = 0.0;
  double w = 0.0;
};

// Square grid over [-half_width, half_width]^2, row-major in (re, im).
std::vector<WignerSample> wigner_grid(const DensityMatrix& rho, double half_width, double step);

}  // namespace dpt
