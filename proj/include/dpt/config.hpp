#pragma once

// JSON experiment configuration. Keys mirror the ExperimentConfig field
// names; omitted keys take their defaults and unknown keys are rejected with
// ConfigError.
//
//   {
//     "dimension": 8,
//     "true_state": {"diagonal": [0.4, 0.6],
//                    "coherences": [{"row": 0, "col": 1, "re": 0.1, "im": 0.0}]},
//     "measurement": {"phase_count": 6, "bin_count": 61,
//                     "quadrature_range": [-6, 6], "efficiency": 0.8,
//                     "shots_per_phase": 200000},
//     "probe_layout": "spiral",
//     "spiral": {"delta_r": 0.0175, "delta_phi": 0.5, "offset": 0.0175},
//     "grid_spacing": 0.25,
//     "probe_counts": [13, 15, 16, 25, 30, 40, 50, 60],
//     "solver": {"mu0": 0.01, "beta": 0.1, "m": null, "residual_tol": 1e-8,
//                "mu_tol": 1e-10, "max_iterations": 500,
//                "backtrack_factor": 0.5, "min_step": 1e-12, "armijo_c": 1e-4,
//                "centering": 10},
//     "seed": 1,
//     "output_directory": "dpt_output",
//     "exact_probabilities": false,
//     "wigner_half_width": 3.0,
//     "wigner_step": 0.1
//   }

#include <filesystem>
#include <string>
#include <string_view>

#include "dpt/experiment.hpp"

namespace dpt {

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config, int indent = 2);

// Parses only a "solver" object, with the same key rules.
SolverOptions parse_solver_options(std::string_view json_text);

}  // namespace dpt
