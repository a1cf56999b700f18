// dpt: simulate homodyne data, reconstruct states from data patterns, run the
// probe-count study and the purity sweep.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 the solver failed
// on every requested run, 1 any other error (I/O, numerical).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpt/config.hpp"
#include "dpt/csv_io.hpp"
#include "dpt/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

dpt::ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? dpt::ExperimentConfig{} : dpt::load_config(path);
}

// A run counts as failed when the solver produced no reconstruction at all.
int report_runs(const dpt::RunReport& report) {
  std::printf("%6s  %-14s %6s  %10s  %10s  %10s\n", "N", "status", "iter", "fidelity", "W(0)",
              "purity");
  int failed = 0;
  for (const auto& r : report.runs) {
    if (!r.solved) {
      ++failed;
      std::printf("%6d  %-14s %s\n", r.probe_count, "error", r.error.c_str());
      continue;
    }
    std::printf("%6d  %-14s %6d  %10.6f  %10.6f  %10.6f\n", r.probe_count,
                dpt::to_string(r.status).c_str(), r.iterations, r.fidelity, r.w0, r.purity);
  }
  std::printf("true W(0) = %.6f\n", report.true_w0);
  return !report.runs.empty() && failed == static_cast<int>(report.runs.size()) ? kExitSolver
                                                                                : kExitOk;
}

std::string read_text(const std::string& path_or_text) {
  std::error_code ec;
  if (!fs::is_regular_file(path_or_text, ec)) return path_or_text;
  std::ifstream in(path_or_text);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  dpt::ExperimentConfig config = config_or_default(config_path);
  if (seed) config.seed = *seed;
  if (config.exact_probabilities) {
    throw dpt::ConfigError("simulate writes sampled histograms; exact_probabilities must be false");
  }
  config.validate();
  const fs::path dir = out.empty() ? fs::path(config.output_directory) : fs::path(out);
  const dpt::PovmSet povm = dpt::build_povm(config.measurement_for_run());
  const dpt::DensityMatrix truth = config.true_state.build(config.dimension);
  const dpt::SimulatedData data = dpt::simulate(config, povm, truth, config.seed);
  dpt::write_data_set(dir, config, data);
  std::printf("wrote %zu probe histograms and the signal histogram to %s\n",
              data.probe_histograms.size(), dir.string().c_str());
  return kExitOk;
}

int run_reconstruct(const std::string& patterns_dir, const std::string& solver_opts,
                    const std::vector<int>& probe_counts, const std::string& out) {
  dpt::DataSet set = dpt::read_data_set(patterns_dir);
  dpt::ExperimentConfig& config = set.config;
  if (!solver_opts.empty()) config.solver = dpt::parse_solver_options(read_text(solver_opts));
  if (!probe_counts.empty()) config.probe_counts = probe_counts;
  config.output_directory =
      out.empty() ? (fs::path(patterns_dir) / "reconstruction").string() : out;
  config.validate();
  if (config.max_probe_count() > static_cast<int>(set.data.amplitudes.size())) {
    throw dpt::ConfigError("the data set holds fewer probes than the largest probe count");
  }

  dpt::RunReport report = dpt::reconstruct_all(config, set.data);
  dpt::write_run_outputs(config, set.data, report);
  const int n = config.max_probe_count();
  const dpt::PatternMatrix patterns(set.data.probe_frequencies.leftCols(n),
                                    set.data.signal_frequencies,
                                    config.measurement.phase_count);
  dpt::write_file(fs::path(config.output_directory) / "patterns.csv",
                  [&](std::ostream& o) { dpt::write_patterns_csv(o, patterns); });
  return report_runs(report);
}

int run_study(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::vector<int>& probe_counts, const std::string& out) {
  dpt::ExperimentConfig config = config_or_default(config_path);
  if (seed) config.seed = *seed;
  if (!probe_counts.empty()) config.probe_counts = probe_counts;
  if (!out.empty()) config.output_directory = out;
  const dpt::RunReport report = dpt::run_experiment(config, true);
  const int code = report_runs(report);
  std::printf("outputs in %s\n", config.output_directory.c_str());
  return code;
}

int run_purity_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
                     std::vector<double> gammas, int runs, bool full, const std::string& out) {
  dpt::ExperimentConfig config = config_or_default(config_path);
  if (seed) config.seed = *seed;
  if (!out.empty()) config.output_directory = out;
  if (full) {
    gammas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    runs = 50;
  }
  if (runs < 1) throw dpt::ConfigError("--runs must be >= 1");
  for (double g : gammas) {
    if (!(std::abs(g) <= 0.5)) throw dpt::ConfigError("gammas must lie in [-0.5, 0.5]");
  }
  const auto rows = dpt::sweep_purity(config, gammas, runs);
  const fs::path path = fs::path(config.output_directory) / "purity_sweep.csv";
  dpt::write_file(path, [&](std::ostream& o) { dpt::write_purity_csv(o, rows); });

  std::printf("%8s  %8s  %13s  %12s  %5s\n", "gamma", "purity", "mean_fidelity", "std_fidelity",
              "fails");
  bool any = false;
  for (const auto& r : rows) {
    any = any || r.runs > 0;
    std::printf("%8.3f  %8.4f  %13.6f  %12.6f  %5d\n", r.gamma, r.purity, r.mean_fidelity,
                r.std_fidelity, r.failures);
  }
  std::printf("wrote %s\n", path.string().c_str());
  return any ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-pattern state tomography with a primal-dual interior-point solver"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<int> probe_counts;

  auto* simulate = app.add_subcommand("simulate", "Sample signal and probe histograms");
  simulate->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Master seed (overrides the config)");
  simulate->add_option("--out", out, "Output directory (default: config output_directory)");

  std::string patterns_dir;
  std::string solver_opts;
  auto* reconstruct =
      app.add_subcommand("reconstruct", "Solve from a data set written by simulate");
  reconstruct->add_option("--patterns", patterns_dir, "Data set directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  reconstruct->add_option("--solver-opts", solver_opts,
                          "Solver options as a JSON object or a path to one");
  reconstruct->add_option("--probe-counts", probe_counts, "Comma-separated probe counts")
      ->delimiter(',');
  reconstruct->add_option("--out", out, "Output directory (default: <patterns>/reconstruction)");

  auto* study = app.add_subcommand("study", "Simulate and reconstruct for every probe count");
  study->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  study->add_option("--seed", seed, "Master seed (overrides the config)");
  study->add_option("--probe-counts", probe_counts, "Comma-separated probe counts")
      ->delimiter(',');
  study->add_option("--out", out, "Output directory (default: config output_directory)");

  std::vector<double> gammas{0.0, 0.25, 0.5};
  int runs = 10;
  bool full = false;
  auto* sweep = app.add_subcommand("purity-sweep", "Mean fidelity across state purities");
  sweep->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "Master seed (overrides the config)");
  sweep->add_option("--gammas", gammas, "Comma-separated coherences gamma")->delimiter(',');
  sweep->add_option("--runs", runs, "Runs per gamma");
  sweep->add_flag("--full", full, "Six gammas 0..0.5 with 50 runs each");
  sweep->add_option("--out", out, "Output directory (default: config output_directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(config_path, seed, out);
    if (*reconstruct) return run_reconstruct(patterns_dir, solver_opts, probe_counts, out);
    if (*study) return run_study(config_path, seed, probe_counts, out);
    if (*sweep) return run_purity_sweep(config_path, seed, gammas, runs, full, out);
  } catch (const dpt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
