#include "dpt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dpt {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

SolverOptions solver_from_json(const json& j) {
  reject_unknown(j, {"mu0", "beta", "m", "residual_tol", "mu_tol", "max_iterations",
                     "backtrack_factor", "min_step", "armijo_c", "centering"},
                 "solver");
  SolverOptions s;
  read(j, "mu0", s.mu0, "solver");
  read(j, "beta", s.beta, "solver");
  if (j.contains("m") && !j.at("m").is_null()) {
    double m = 0.0;
    read(j, "m", m, "solver");
    s.m = m;
  }
  read(j, "residual_tol", s.residual_tol, "solver");
  read(j, "mu_tol", s.mu_tol, "solver");
  read(j, "max_iterations", s.max_iterations, "solver");
  read(j, "backtrack_factor", s.backtrack_factor, "solver");
  read(j, "min_step", s.min_step, "solver");
  read(j, "armijo_c", s.armijo_c, "solver");
  read(j, "centering", s.centering, "solver");
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

json solver_to_json(const SolverOptions& s) {
  json j;
  j["mu0"] = s.mu0;
  j["beta"] = s.beta;
  j["m"] = s.m ? json(*s.m) : json(nullptr);
  j["residual_tol"] = s.residual_tol;
  j["mu_tol"] = s.mu_tol;
  j["max_iterations"] = s.max_iterations;
  j["backtrack_factor"] = s.backtrack_factor;
  j["min_step"] = s.min_step;
  j["armijo_c"] = s.armijo_c;
  j["centering"] = s.centering;
  return j;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

SolverOptions parse_solver_options(std::string_view json_text) {
  return solver_from_json(parse_json(json_text));
}

ExperimentConfig parse_config(std::string_view json_text) {
  const json root = parse_json(json_text);
  reject_unknown(root,
                 {"dimension", "true_state", "measurement", "probe_layout", "spiral",
                  "grid_spacing", "probe_counts", "solver", "seed", "output_directory",
                  "exact_probabilities", "wigner_half_width", "wigner_step"},
                 "config");
  ExperimentConfig c;
  read(root, "dimension", c.dimension, "config");

  if (root.contains("true_state")) {
    const json& ts = root.at("true_state");
    reject_unknown(ts, {"diagonal", "coherences"}, "true_state");
    read(ts, "diagonal", c.true_state.diagonal, "true_state");
    if (ts.contains("coherences")) {
      c.true_state.coherences.clear();
      const json& list = ts.at("coherences");
      if (!list.is_array()) throw ConfigError("true_state.coherences: expected an array");
      for (const json& item : list) {
        reject_unknown(item, {"row", "col", "re", "im"}, "true_state.coherences[]");
        Coherence coh;
        double re = 0.0;
        double im = 0.0;
        read(item, "row", coh.row, "coherence");
        read(item, "col", coh.col, "coherence");
        read(item, "re", re, "coherence");
        read(item, "im", im, "coherence");
        coh.value = {re, im};
        c.true_state.coherences.push_back(coh);
      }
    }
  }

  if (root.contains("measurement")) {
    const json& m = root.at("measurement");
    reject_unknown(m, {"phase_count", "bin_count", "quadrature_range", "efficiency",
                       "shots_per_phase"},
                   "measurement");
    read(m, "phase_count", c.measurement.phase_count, "measurement");
    read(m, "bin_count", c.measurement.bin_count, "measurement");
    if (m.contains("quadrature_range")) {
      std::vector<double> range;
      read(m, "quadrature_range", range, "measurement");
      if (range.size() != 2) throw ConfigError("measurement.quadrature_range: expected [x_min, x_max]");
      c.measurement.x_min = range[0];
      c.measurement.x_max = range[1];
    }
    read(m, "efficiency", c.measurement.efficiency, "measurement");
    read(m, "shots_per_phase", c.measurement.shots_per_phase, "measurement");
  }

  if (root.contains("probe_layout")) {
    std::string layout;
    read(root, "probe_layout", layout, "config");
    if (layout == "spiral") {
      c.probe_layout = ProbeLayout::Spiral;
    } else if (layout == "grid") {
      c.probe_layout = ProbeLayout::Grid;
    } else {
      throw ConfigError("config.probe_layout: expected \"spiral\" or \"grid\"");
    }
  }

  if (root.contains("spiral")) {
    const json& s = root.at("spiral");
    reject_unknown(s, {"delta_r", "delta_phi", "offset"}, "spiral");
    read(s, "delta_r", c.spiral.delta_r, "spiral");
    read(s, "delta_phi", c.spiral.delta_phi, "spiral");
    if (s.contains("offset") && !s.at("offset").is_null()) {
      double offset = 0.0;
      read(s, "offset", offset, "spiral");
      c.spiral.offset = offset;
    }
  }

  read(root, "grid_spacing", c.grid_spacing, "config");
  read(root, "probe_counts", c.probe_counts, "config");
  if (root.contains("solver")) c.solver = solver_from_json(root.at("solver"));
  read(root, "seed", c.seed, "config");
  read(root, "output_directory", c.output_directory, "config");
  read(root, "exact_probabilities", c.exact_probabilities, "config");
  read(root, "wigner_half_width", c.wigner_half_width, "config");
  read(root, "wigner_step", c.wigner_step, "config");

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c, int indent) {
  json root;
  root["dimension"] = c.dimension;
  json coherences = json::array();
  for (const Coherence& coh : c.true_state.coherences) {
    coherences.push_back(
        {{"row", coh.row}, {"col", coh.col}, {"re", coh.value.real()}, {"im", coh.value.imag()}});
  }
  root["true_state"] = {{"diagonal", c.true_state.diagonal}, {"coherences", coherences}};
  root["measurement"] = {{"phase_count", c.measurement.phase_count},
                         {"bin_count", c.measurement.bin_count},
                         {"quadrature_range", {c.measurement.x_min, c.measurement.x_max}},
                         {"efficiency", c.measurement.efficiency},
                         {"shots_per_phase", c.measurement.shots_per_phase}};
  root["probe_layout"] = c.probe_layout == ProbeLayout::Spiral ? "spiral" : "grid";
  root["spiral"] = {{"delta_r", c.spiral.delta_r},
                    {"delta_phi", c.spiral.delta_phi},
                    {"offset", c.spiral.first_radius()}};
  root["grid_spacing"] = c.grid_spacing;
  root["probe_counts"] = c.probe_counts;
  root["solver"] = solver_to_json(c.solver);
  root["seed"] = c.seed;
  root["output_directory"] = c.output_directory;
  root["exact_probabilities"] = c.exact_probabilities;
  root["wigner_half_width"] = c.wigner_half_width;
  root["wigner_step"] = c.wigner_step;
  return root.dump(indent);
}

}  // namespace dpt
