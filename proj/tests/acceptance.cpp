// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   dpt_acceptance --cli path/to/dpt --work-dir scratch/

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpt/experiment.hpp"
#include "dpt/homodyne.hpp"
#include "dpt/ip_solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dpt;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::map<int, std::string> lines;  // printed in criterion order at the end

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  lines[id] = std::string(pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(id) + ": " +
              what + "  [" + detail + "]";
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const ProbeRunRecord* find_run(const RunReport& r, int n) {
  for (const ProbeRunRecord& rec : r.runs)
    if (rec.probe_count == n) return &rec;
  return nullptr;
}

// Default configuration over seeds 1..10; criteria 1, 2, 3 and 8 share these runs.
void case_study() {
  std::vector<RunReport> reports;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ExperimentConfig c;
    c.seed = seed;
    reports.push_back(run_experiment(c, false));
  }

  {
    double sum = 0.0;
    double best = 0.0;
    int solved = 0;
    for (const RunReport& r : reports) {
      const ProbeRunRecord* n60 = find_run(r, 60);
      if (n60 == nullptr || !n60->solved) continue;
      ++solved;
      sum += n60->fidelity;
      best = std::max(best, n60->fidelity);
    }
    const double mean = sum / 10.0;
    report(1, solved == 10 && mean >= 0.98 && best >= 0.99,
           "N=60 mean fidelity >= 0.98 and best seed >= 0.99 over 10 seeds",
           fmt("solved %d/10, mean %.5f, best %.5f", solved, mean, best));
  }

  {
    int pos13 = 0, neg16 = 0, band60 = 0;
    std::string w16;
    for (const RunReport& r : reports) {
      const ProbeRunRecord* a = find_run(r, 13);
      const ProbeRunRecord* b = find_run(r, 16);
      const ProbeRunRecord* c = find_run(r, 60);
      if (a && a->solved && a->w0 > 0.0) ++pos13;
      if (b && b->solved && b->w0 < 0.0) ++neg16;
      if (c && c->solved && c->w0 >= -0.55 && c->w0 <= -0.25) ++band60;
      if (b && b->solved) w16 += fmt("%s%.3f", w16.empty() ? "" : " ", b->w0);
    }
    report(2, pos13 >= 8 && neg16 >= 8 && band60 >= 8,
           "W(0) > 0 at N=13, < 0 at N=16, in [-0.55, -0.25] at N=60, each on >= 8/10 seeds",
           fmt("N=13 positive %d/10, N=16 negative %d/10, N=60 in band %d/10; W(0) at N=16: %s",
               pos13, neg16, band60, w16.c_str()));
  }

  {
    int ok = 0;
    int worst_iter = 0;
    double worst_res = 0.0;
    double worst_tail = 0.0;
    for (const RunReport& r : reports) {
      const ProbeRunRecord* n60 = find_run(r, 60);
      if (n60 == nullptr || !n60->solved) continue;
      const TraceRecord& last = n60->solution->trace.back();
      worst_iter = std::max(worst_iter, n60->iterations);
      worst_res = std::max(worst_res, last.residual);
      worst_tail = std::max(worst_tail, last.min_eigenvalue);
      if (n60->status == SolverStatus::Converged && last.residual <= 1e-8 &&
          n60->iterations <= 200 && last.min_eigenvalue < 1e-4)
        ++ok;
    }
    report(3, ok == 10,
           "N=60 Converged, residual <= 1e-8 within 200 iterations, final min eigenvalue < 1e-4",
           fmt("%d/10 seeds; worst iterations %d, residual %.2e, final min eig %.2e", ok,
               worst_iter, worst_res, worst_tail));
  }

  {
    int runs = 0;
    int bad = 0;
    int iterates = 0;
    double worst_trace = 0.0;
    double lowest_eig = std::numeric_limits<double>::infinity();
    double lowest_iterate = std::numeric_limits<double>::infinity();
    for (const RunReport& r : reports) {
      for (const ProbeRunRecord& rec : r.runs) {
        if (!rec.solved) {
          ++bad;
          continue;
        }
        ++runs;
        const double tr = rec.solution->rho.matrix().trace().real();
        worst_trace = std::max(worst_trace, std::abs(tr - 1.0));
        lowest_eig = std::min(lowest_eig, rec.min_eigenvalue);
        for (const TraceRecord& t : rec.solution->trace.records()) {
          ++iterates;
          lowest_iterate = std::min(lowest_iterate, t.min_eigenvalue);
        }
      }
    }
    report(8, bad == 0 && worst_trace <= 1e-12 && lowest_eig >= -1e-10 && lowest_iterate > 0.0,
           "trace 1, min eigenvalue >= -1e-10, every accepted iterate strictly feasible",
           fmt("%d reconstructions, %d failed, max |tr-1| %.1e, min eig %.2e, %d iterates with "
               "min eig >= %.2e",
               runs, bad, worst_trace, lowest_eig, iterates, lowest_iterate));
  }
}

void grid_oracle() {
  MeasurementConfig mc;
  mc.dim = 2;
  const PovmSet povm = build_povm(mc);
  std::mt19937_64 rng(9001);
  std::uniform_real_distribution<double> radius(0.2, 1.2);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  int ok = 0;
  double above_grid = -std::numeric_limits<double>::infinity();
  double off_zoomed = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Complex> amps;
    for (int i = 0; i < 3; ++i) amps.push_back(std::polar(radius(rng), angle(rng)));
    const ProbeSet probes(amps, 2);
    const PatternMatrix p = oracle::exact_patterns(probes, povm, dpt::testing::random_state(2, rng));
    const oracle::GridMinimum grid = oracle::grid_minimum(p, probes);
    const oracle::GridMinimum zoomed = oracle::grid_minimum(p, probes, 10);
    try {
      const double value = objective_and_gradient(solve(p, probes).x, p).value;
      above_grid = std::max(above_grid, value - grid.value);
      off_zoomed = std::max(off_zoomed, std::abs(value - zoomed.value));
      if (grid.feasible_points > 0 && value - grid.value <= 1e-6 &&
          std::abs(value - zoomed.value) <= 1e-6)
        ++ok;
    } catch (const Error&) {
    }
  }
  // A single 10^4 grid only bounds the optimum from above (its spacing costs
  // ~1e-4 in F); the zoomed grids pin it down from both sides.
  report(4, ok == 20,
         "solver F within 1e-6 of brute force: not above the 10^4-point grid, and two-sided "
         "against repeated 10^4-point zooms, 20 qubit instances",
         fmt("%d/20; max F_solver - F_grid %.2e, max |F_solver - F_zoomed| %.2e", ok, above_grid,
             off_zoomed));
}

void derivatives() {
  MeasurementConfig mc;
  mc.dim = 3;
  mc.bin_count = 31;
  const PovmSet povm = build_povm(mc);
  const ProbeSet probes({Complex(0.4, 0.1), Complex(-0.6, 0.5), Complex(0.2, -0.9),
                         Complex(1.0, 0.6), Complex(-0.3, -0.2)},
                        3);
  const double m = 1.0 / 3.0;
  std::mt19937_64 rng(31337);
  const PatternMatrix p = oracle::exact_patterns(probes, povm, dpt::testing::random_state(3, rng));
  const RealMatrix& f = p.probe_frequencies();

  // F straight from the pattern columns.
  auto objective = [&](const RealVector& x) {
    RealVector fhat = f.col(4);
    for (int i = 0; i < 4; ++i) fhat += x(i) * (f.col(i) - f.col(4));
    return (p.signal() - fhat).squaredNorm();
  };
  auto constraint = [&](const RealVector& x) { return oracle::lu_constraint(x, probes, m); };

  double eg = 0.0, eh = 0.0, ej = 0.0, eb = 0.0;
  std::normal_distribution<double> g(0.0, 0.15);
  for (int trial = 0; trial < 20; ++trial) {
    RealVector x;
    for (;;) {
      x = RealVector::Constant(4, 0.2);
      for (int i = 0; i < 4; ++i) x(i) += g(rng);
      if (min_eigenvalue(rho_matrix_from_x(x, probes)) > 1e-3) break;
    }
    eg = std::max(eg, oracle::relative_error(objective_and_gradient(x, p).gradient,
                                             oracle::fd_gradient(x, 1e-6, objective)));
    eh = std::max(eh, oracle::relative_error(objective_hessian(p),
                                             oracle::fd_hessian(x, 1e-4, objective)));
    const ConstraintDerivatives d = constraint_derivatives(x, probes, m);
    ej = std::max(ej, oracle::relative_error(d.jacobian, oracle::fd_gradient(x, 1e-6, constraint)));
    eb = std::max(eb, oracle::relative_error(d.hessian, oracle::fd_hessian(x, 1e-4, constraint)));
  }
  report(5, std::max({eg, eh, ej, eb}) <= 1e-5,
         "g, Hessian of F, J and B match central differences within 1e-5, 20 points, d=3, N=5",
         fmt("max relative errors g %.1e, H %.1e, J %.1e, B %.1e", eg, eh, ej, eb));
}

void measurement_model() {
  double worst_var = 0.0;
  double worst_complete = 0.0;
  for (double eta : {1.0, 0.8}) {
    MeasurementConfig mc;
    mc.efficiency = eta;
    const PovmSet povm = build_povm(mc);
    worst_complete = std::max(worst_complete, povm.completeness_residual());
    const RealVector p = outcome_probabilities(fock_mixture(8, std::vector<double>{1.0}), povm);
    const double h = mc.bin_width();
    for (int k = 0; k < mc.phase_count; ++k) {
      double m1 = 0.0, m2 = 0.0;
      for (int b = 0; b < mc.bin_count; ++b) {
        m1 += p(povm.index(k, b)) * mc.bin_center(b);
        m2 += p(povm.index(k, b)) * mc.bin_center(b) * mc.bin_center(b);
      }
      // Sheppard's correction removes the h^2/12 that bin centers add.
      worst_var = std::max(worst_var, std::abs(m2 - m1 * m1 - h * h / 12.0 - 0.5));
    }
  }
  MeasurementConfig ideal_mc;
  ideal_mc.efficiency = 1.0;
  const PovmSet ideal = build_povm(ideal_mc);
  const PovmSet lossy = build_povm(MeasurementConfig{});
  const RealVector p0 = outcome_probabilities(fock_mixture(8, std::vector<double>{1.0}), ideal);
  const RealVector p1 = outcome_probabilities(fock_mixture(8, std::vector<double>{0.0, 1.0}), ideal);
  const RealVector l1 = outcome_probabilities(fock_mixture(8, std::vector<double>{0.0, 1.0}), lossy);
  const double law = (l1 - (0.8 * p1 + 0.2 * p0)).cwiseAbs().maxCoeff();
  report(6, worst_var <= 2e-3 && law <= 1e-7 && worst_complete <= 1e-6,
         "vacuum variance 0.5 +- 2e-3 at eta 1 and 0.8, |1> loss law within 1e-7, completeness <= 1e-6",
         fmt("variance error %.1e, loss law %.1e, completeness %.1e", worst_var, law, worst_complete));
}

void purity_sweep() {
  const ExperimentConfig c;
  const std::vector<PurityRow> rows = sweep_purity(c, {0.0, 0.25, 0.5}, 10);
  double lo = 1.0, hi = 0.0;
  int failed = 0;
  std::string means;
  for (const PurityRow& r : rows) {
    lo = std::min(lo, r.mean_fidelity);
    hi = std::max(hi, r.mean_fidelity);
    failed += r.failures;
    means += fmt("%s%.4f", means.empty() ? "" : " ", r.mean_fidelity);
  }
  report(7, failed == 0 && lo >= 0.97 && hi - lo <= 0.02,
         "purity sweep gamma 0, 0.25, 0.5 with 10 runs: means >= 0.97, spread <= 0.02",
         fmt("means %s, spread %.4f, failed runs %d", means.c_str(), hi - lo, failed));
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

void determinism(const std::string& cli, const fs::path& work) {
  std::vector<std::map<std::string, std::string>> outputs;
  int codes = 0;
  for (const char* name : {"study_a", "study_b"}) {
    const fs::path out = work / name;
    fs::remove_all(out);
    const std::string cmd = "\"" + cli + "\" study --seed 7 --out \"" + out.string() + "\" > /dev/null";
    codes += std::system(cmd.c_str()) != 0;
    outputs.push_back(csv_files(out));
  }
  const bool same = outputs[0] == outputs[1];
  report(9, codes == 0 && !outputs[0].empty() && same,
         "two study runs with the same seed write identical CSV files",
         fmt("%zu CSV files, %s, %d non-zero exits", outputs[0].size(),
             same ? "identical" : "different", codes));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::string work = "acceptance_work";
  app.add_option("--cli", cli, "Path to the dpt executable")->required();
  app.add_option("--work-dir", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  case_study();
  grid_oracle();
  derivatives();
  measurement_model();
  purity_sweep();
  determinism(cli, work);

  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
