#include "dpt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "dpt/config.hpp"
#include "dpt/csv_io.hpp"
#include "json.hpp"

namespace dpt {

namespace {

constexpr const char* kVersion = "1.0.0";

// Calls fn(i) for i in [0, count) on up to hardware_concurrency threads.
// Each index writes only its own slot, so results do not depend on the
// thread count.
template <class F>
void parallel_for(int count, F&& fn) {
  const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1,
                                 std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
}

std::string padded(int n) {
  std::ostringstream os;
  os << std::setw(3) << std::setfill('0') << n;
  return os.str();
}

}  // namespace

void SpiralParams::validate() const {
  if (!(delta_r > 0.0)) throw ConfigError("spiral.delta_r must be positive");
  if (!std::isfinite(delta_phi)) throw ConfigError("spiral.delta_phi must be finite");
  if (offset && !(*offset >= 0.0)) throw ConfigError("spiral.offset must be >= 0");
}

std::vector<Complex> spiral_amplitudes(int n, const SpiralParams& params) {
  if (n < 0) throw InvalidArgument("spiral_amplitudes: negative count");
  std::vector<Complex> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    out.push_back(std::polar(params.first_radius() + k * params.delta_r, k * params.delta_phi));
  }
  return out;
}

std::vector<Complex> grid_amplitudes(int n, double spacing) {
  if (n < 0) throw InvalidArgument("grid_amplitudes: negative count");
  if (!(spacing > 0.0)) throw InvalidArgument("grid_amplitudes: spacing must be positive");
  struct Point {
    int i, j;
    long r2;
    double angle;
  };
  std::vector<Point> pts;
  // Grow the square until its inscribed disc, which holds only complete
  // radius shells, contains n points.
  for (int extent = 1;; extent *= 2) {
    pts.clear();
    const long limit = static_cast<long>(extent) * extent;
    for (int i = -extent; i <= extent; ++i) {
      for (int j = -extent; j <= extent; ++j) {
        const long r2 = static_cast<long>(i) * i + static_cast<long>(j) * j;
        if (r2 > limit) continue;
        double angle = std::atan2(static_cast<double>(j), static_cast<double>(i));
        if (angle < 0.0) angle += 2.0 * std::numbers::pi;
        pts.push_back({i, j, r2, angle});
      }
    }
    if (static_cast<int>(pts.size()) >= n) break;
  }
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.r2 != b.r2 ? a.r2 < b.r2 : a.angle < b.angle;
  });
  std::vector<Complex> out;
  for (int k = 0; k < n; ++k) out.emplace_back(spacing * pts[k].i, spacing * pts[k].j);
  return out;
}

ProbeSet spiral_probes(int n, const SpiralParams& params, int dim) {
  if (n < 2) throw InvalidArgument("spiral_probes: at least two probes are required");
  return ProbeSet(spiral_amplitudes(n, params), dim);
}

DensityMatrix TrueStateSpec::build(int dim) const { return fock_mixture(dim, diagonal, coherences); }

TrueStateSpec coherent_superposition_family(double gamma) {
  if (!(std::abs(gamma) <= 0.5)) {
    std::ostringstream os;
    os << "gamma = " << gamma << " does not give a positive state (|gamma| <= 0.5)";
    throw NotPSD(os.str());
  }
  TrueStateSpec spec;
  spec.diagonal = {0.5, 0.5};
  spec.coherences = {{0, 1, Complex(gamma, 0.0)}};
  return spec;
}

void ExperimentConfig::validate() const {
  if (dimension < 1) throw ConfigError("dimension must be >= 1");
  try {
    measurement_for_run().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  spiral.validate();
  if (!(grid_spacing > 0.0)) throw ConfigError("grid_spacing must be positive");
  if (probe_counts.empty()) throw ConfigError("probe_counts must not be empty");
  for (std::size_t i = 0; i < probe_counts.size(); ++i) {
    if (probe_counts[i] < 2) throw ConfigError("every probe count must be >= 2");
    if (i > 0 && probe_counts[i] <= probe_counts[i - 1]) {
      throw ConfigError("probe_counts must be strictly ascending");
    }
    if (probe_counts[i] >= measurement.outcome_count()) {
      std::ostringstream os;
      os << "probe count " << probe_counts[i] << " must be smaller than the number of outcomes "
         << measurement.outcome_count();
      throw ConfigError(os.str());
    }
  }
  if (!(wigner_half_width > 0.0) || !(wigner_step > 0.0)) {
    throw ConfigError("wigner_half_width and wigner_step must be positive");
  }
  try {
    solver.validate();
    true_state.build(dimension);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

int ExperimentConfig::max_probe_count() const {
  return *std::max_element(probe_counts.begin(), probe_counts.end());
}

MeasurementConfig ExperimentConfig::measurement_for_run() const {
  MeasurementConfig m = measurement;
  m.dim = dimension;
  return m;
}

std::vector<Complex> probe_amplitudes(const ExperimentConfig& config, int n) {
  return config.probe_layout == ProbeLayout::Spiral ? spiral_amplitudes(n, config.spiral)
                                                    : grid_amplitudes(n, config.grid_spacing);
}

SimulatedData simulate(const ExperimentConfig& config, const PovmSet& povm,
                       const DensityMatrix& true_state, std::uint64_t seed) {
  const MeasurementConfig& mc = povm.config();
  const int n = config.max_probe_count();
  SimulatedData data{true_state, probe_amplitudes(config, n), std::nullopt, {}, {}, {}};
  const ProbeSet probes(data.amplitudes, mc.dim);

  const RealVector signal_p = outcome_probabilities(true_state, povm);
  data.probe_frequencies.resize(mc.outcome_count(), n);
  if (config.exact_probabilities) {
    data.signal_frequencies = signal_p;
    for (int i = 0; i < n; ++i) {
      data.probe_frequencies.col(i) = outcome_probabilities(probes.projector(i), povm);
    }
    return data;
  }

  data.signal_histogram =
      sample_histogram(signal_p, mc.phase_count, mc.shots_per_phase, derive_seed(seed, 0));
  data.signal_frequencies = data.signal_histogram->frequencies();
  data.probe_histograms.resize(n);
  for (int i = 0; i < n; ++i) {
    const RealVector p = outcome_probabilities(probes.projector(i), povm);
    data.probe_histograms[i] = sample_histogram(p, mc.phase_count, mc.shots_per_phase,
                                                derive_seed(seed, static_cast<std::uint64_t>(i + 1)));
    data.probe_frequencies.col(i) = data.probe_histograms[i].frequencies();
  }
  return data;
}

ProbeRunRecord reconstruct(const SimulatedData& data, int n, int phase_count, int dim,
                           const SolverOptions& options) {
  ProbeRunRecord rec;
  rec.probe_count = n;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (n > static_cast<int>(data.amplitudes.size()) || n > data.probe_frequencies.cols()) {
      throw InvalidArgument("reconstruct: data holds fewer probes than requested");
    }
    const ProbeSet probes(std::vector<Complex>(data.amplitudes.begin(), data.amplitudes.begin() + n),
                          dim);
    const PatternMatrix patterns(data.probe_frequencies.leftCols(n), data.signal_frequencies,
                                 phase_count);
    SolveResult sol = solve(patterns, probes, options);
    rec.solved = true;
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.fidelity = fidelity(data.true_state, sol.rho);
    rec.w0 = wigner_at(sol.rho, 0.0);
    rec.purity = purity(sol.rho);
    rec.min_eigenvalue = min_eigenvalue(sol.rho.matrix());
    rec.final_residual = sol.trace.back().residual;
    rec.solution = std::move(sol);
  } catch (const Error& e) {
    rec.error = e.what();
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

RunReport reconstruct_all(const ExperimentConfig& config, const SimulatedData& data) {
  const int phases = config.measurement.phase_count;
  RunReport report;
  report.true_w0 = wigner_at(data.true_state, 0.0);
  report.runs.resize(config.probe_counts.size());
  parallel_for(static_cast<int>(config.probe_counts.size()), [&](int i) {
    report.runs[i] =
        reconstruct(data, config.probe_counts[i], phases, config.dimension, config.solver);
  });
  return report;
}

void write_run_outputs(const ExperimentConfig& config, const SimulatedData& data,
                       RunReport& report) {
  namespace fs = std::filesystem;
  const fs::path dir = config.output_directory;
  const MeasurementConfig mc = config.measurement_for_run();
  auto emit = [&](const fs::path& name, const std::function<void(std::ostream&)>& fill) {
    write_file(dir / name, fill);
    report.artifacts.push_back(dir / name);
  };
  const double hw = config.wigner_half_width;
  const double step = config.wigner_step;

  emit("probes.csv", [&](std::ostream& o) { write_probes_csv(o, data.amplitudes); });
  emit("wigner_true.csv",
       [&](std::ostream& o) { write_wigner_csv(o, wigner_grid(data.true_state, hw, step)); });
  if (data.signal_histogram) {
    emit("signal_histogram.csv",
         [&](std::ostream& o) { write_histogram_csv(o, *data.signal_histogram, mc); });
  }
  emit("w0_vs_probes.csv", [&](std::ostream& o) { write_run_table_csv(o, report.runs); });
  for (const ProbeRunRecord& r : report.runs) {
    if (!r.solution) continue;
    const std::string tag = "N" + padded(r.probe_count);
    emit("trace_" + tag + ".csv", [&](std::ostream& o) { r.solution->trace.write_csv(o); });
    emit("rho_" + tag + ".csv",
         [&](std::ostream& o) { write_density_matrix_csv(o, r.solution->rho.matrix()); });
    emit("wigner_" + tag + ".csv",
         [&](std::ostream& o) { write_wigner_csv(o, wigner_grid(r.solution->rho, hw, step)); });
  }

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = nlohmann::json::parse(config_to_json(config));
  manifest["seed"] = config.seed;
  manifest["true_w0"] = report.true_w0;
  nlohmann::json runs = nlohmann::json::array();
  for (const ProbeRunRecord& r : report.runs) {
    runs.push_back({{"probe_count", r.probe_count},
                    {"status", r.solved ? to_string(r.status) : "error"},
                    {"error", r.error},
                    {"iterations", r.iterations},
                    {"fidelity", r.fidelity},
                    {"w0", r.w0},
                    {"purity", r.purity},
                    {"wall_seconds", r.wall_seconds}});
  }
  manifest["runs"] = runs;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : report.artifacts) files.push_back(p.filename().string());
  manifest["artifacts"] = files;
  write_file(dir / "manifest.json", [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
  report.artifacts.push_back(dir / "manifest.json");
}

RunReport run_experiment(const ExperimentConfig& config, bool write_outputs) {
  config.validate();
  const PovmSet povm = build_povm(config.measurement_for_run());
  const DensityMatrix truth = config.true_state.build(config.dimension);
  const SimulatedData data = simulate(config, povm, truth, config.seed);
  RunReport report = reconstruct_all(config, data);
  if (write_outputs) write_run_outputs(config, data, report);
  return report;
}

void write_data_set(const std::filesystem::path& dir, const ExperimentConfig& config,
                    const SimulatedData& data) {
  if (!data.signal_histogram) {
    throw InvalidArgument("write_data_set: exact-probability data has no histograms");
  }
  const MeasurementConfig mc = config.measurement_for_run();
  write_file(dir / "config.json", [&](std::ostream& o) { o << config_to_json(config) << '\n'; });
  write_file(dir / "probes.csv", [&](std::ostream& o) { write_probes_csv(o, data.amplitudes); });
  write_file(dir / "signal_histogram.csv",
             [&](std::ostream& o) { write_histogram_csv(o, *data.signal_histogram, mc); });
  for (std::size_t i = 0; i < data.probe_histograms.size(); ++i) {
    const auto name = "probe_" + padded(static_cast<int>(i) + 1) + ".csv";
    write_file(dir / "probe_histograms" / name,
               [&](std::ostream& o) { write_histogram_csv(o, data.probe_histograms[i], mc); });
  }
}

namespace {

Histogram read_histogram_file(const std::filesystem::path& path, const MeasurementConfig& mc) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Histogram h = read_histogram_csv(in);
  if (h.phase_count != mc.phase_count || h.bin_count != mc.bin_count) {
    throw ShapeMismatch(path.string() + ": histogram shape does not match config.json");
  }
  return h;
}

}  // namespace

DataSet read_data_set(const std::filesystem::path& dir) {
  ExperimentConfig config = load_config(dir / "config.json");
  const MeasurementConfig mc = config.measurement_for_run();

  std::ifstream probes_in(dir / "probes.csv");
  if (!probes_in) throw IoError("cannot open " + (dir / "probes.csv").string());
  std::vector<Complex> amplitudes = read_probes_csv(probes_in);

  SimulatedData data{config.true_state.build(config.dimension), std::move(amplitudes),
                     read_histogram_file(dir / "signal_histogram.csv", mc), {}, {}, {}};
  data.signal_frequencies = data.signal_histogram->frequencies();
  const int n = static_cast<int>(data.amplitudes.size());
  data.probe_frequencies.resize(mc.outcome_count(), n);
  for (int i = 0; i < n; ++i) {
    const auto name = "probe_" + padded(i + 1) + ".csv";
    data.probe_histograms.push_back(read_histogram_file(dir / "probe_histograms" / name, mc));
    data.probe_frequencies.col(i) = data.probe_histograms.back().frequencies();
  }
  return {std::move(config), std::move(data)};
}

std::vector<PurityRow> sweep_purity(const ExperimentConfig& config,
                                    const std::vector<double>& gammas, int runs_per_gamma) {
  config.validate();
  if (runs_per_gamma < 1) throw InvalidArgument("sweep_purity: runs_per_gamma must be >= 1");
  std::vector<TrueStateSpec> specs;
  for (double g : gammas) specs.push_back(coherent_superposition_family(g));

  const MeasurementConfig mc = config.measurement_for_run();
  const PovmSet povm = build_povm(mc);
  const int n = config.max_probe_count();

  std::vector<PurityRow> rows;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    const DensityMatrix truth = specs[gi].build(config.dimension);
    const std::uint64_t gamma_seed = derive_seed(config.seed, 1000 + gi);
    std::vector<ProbeRunRecord> records(runs_per_gamma);
    parallel_for(runs_per_gamma, [&](int r) {
      const SimulatedData data =
          simulate(config, povm, truth, derive_seed(gamma_seed, static_cast<std::uint64_t>(r)));
      records[r] = reconstruct(data, n, mc.phase_count, config.dimension, config.solver);
      records[r].solution.reset();
    });

    PurityRow row;
    row.gamma = gammas[gi];
    row.purity = purity(truth);
    std::vector<double> fids;
    for (const ProbeRunRecord& rec : records) {
      if (rec.solved) {
        fids.push_back(rec.fidelity);
      } else {
        ++row.failures;
      }
    }
    row.runs = static_cast<int>(fids.size());
    if (!fids.empty()) {
      double mean = 0.0;
      for (double f : fids) mean += f;
      mean /= static_cast<double>(fids.size());
      double var = 0.0;
      for (double f : fids) var += (f - mean) * (f - mean);
      row.mean_fidelity = mean;
      row.std_fidelity = fids.size() > 1 ? std::sqrt(var / static_cast<double>(fids.size() - 1)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<WignerSample> wigner_grid(const DensityMatrix& rho, double half_width, double step) {
  if (!(step > 0.0)) throw InvalidArgument("wigner_grid: step must be positive");
  if (!(half_width >= 0.0)) throw InvalidArgument("wigner_grid: half_width must be >= 0");
  const int per_side = static_cast<int>(std::floor(2.0 * half_width / step + 1e-9)) + 1;
  std::vector<WignerSample> out;
  out.reserve(static_cast<std::size_t>(per_side) * per_side);
  for (int i = 0; i < per_side; ++i) {
    const double re = -half_width + i * step;
    for (int j = 0; j < per_side; ++j) {
      const double im = -half_width + j * step;
      out.push_back({re, im, wigner_at(rho, Complex(re, im))});
    }
  }
  return out;
}

}  // namespace dpt
