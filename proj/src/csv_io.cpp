#include "dpt/csv_io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace dpt {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

bool next_data_row(std::istream& in, std::vector<std::string>& cells) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    cells = split_row(line);
    return true;
  }
  return false;
}

template <class T>
T parse_cell(const std::string& s, const char* what) {
  std::istringstream is(s);
  T value{};
  is >> value;
  if (is.fail()) throw IoError(std::string("csv: cannot parse ") + what + " from '" + s + "'");
  return value;
}

}  // namespace

void write_histogram_csv(std::ostream& out, const Histogram& h, const MeasurementConfig& config) {
  if (h.phase_count != config.phase_count || h.bin_count != config.bin_count) {
    throw ShapeMismatch("write_histogram_csv: histogram does not match measurement config");
  }
  const RealVector f = h.frequencies();
  out << "phase_index,bin_index,x_left,x_right,count,frequency\n" << std::setprecision(17);
  for (int k = 0; k < h.phase_count; ++k) {
    for (int b = 0; b < h.bin_count; ++b) {
      const int l = k * h.bin_count + b;
      out << k << ',' << b << ',' << config.bin_left(b) << ',' << config.bin_right(b) << ','
          << h.counts[l] << ',' << f(l) << '\n';
    }
  }
}

Histogram read_histogram_csv(std::istream& in) {
  std::vector<std::string> cells;
  if (!next_data_row(in, cells) || cells.empty() || cells[0] != "phase_index") {
    throw IoError("histogram csv: missing header");
  }
  std::map<std::pair<int, int>, std::int64_t> entries;
  int phases = 0;
  int bins = 0;
  while (next_data_row(in, cells)) {
    if (cells.size() != 6) throw IoError("histogram csv: expected 6 columns");
    const int k = parse_cell<int>(cells[0], "phase_index");
    const int b = parse_cell<int>(cells[1], "bin_index");
    const auto count = parse_cell<std::int64_t>(cells[4], "count");
    if (k < 0 || b < 0 || count < 0) throw IoError("histogram csv: negative entry");
    if (!entries.emplace(std::make_pair(k, b), count).second) {
      throw IoError("histogram csv: duplicate (phase, bin) row");
    }
    phases = std::max(phases, k + 1);
    bins = std::max(bins, b + 1);
  }
  if (static_cast<int>(entries.size()) != phases * bins || entries.empty()) {
    throw IoError("histogram csv: rows do not form a complete phase x bin table");
  }
  Histogram h;
  h.phase_count = phases;
  h.bin_count = bins;
  h.counts.assign(static_cast<std::size_t>(phases) * bins, 0);
  for (const auto& [key, count] : entries) h.counts[key.first * bins + key.second] = count;
  for (int k = 0; k < phases; ++k) {
    std::int64_t total = 0;
    for (int b = 0; b < bins; ++b) total += h.counts[k * bins + b];
    if (k == 0) {
      h.shots_per_phase = total;
    } else if (total != h.shots_per_phase) {
      throw IoError("histogram csv: phases have different shot counts");
    }
  }
  return h;
}

void write_patterns_csv(std::ostream& out, const PatternMatrix& patterns) {
  const int bins = patterns.outcome_count() / patterns.phase_count();
  out << "outcome,phase_index,bin_index";
  for (int i = 0; i < patterns.probe_count(); ++i) out << ",probe_" << (i + 1);
  out << ",signal\n" << std::setprecision(17);
  for (int l = 0; l < patterns.outcome_count(); ++l) {
    out << l << ',' << l / bins << ',' << l % bins;
    for (int i = 0; i < patterns.probe_count(); ++i) {
      out << ',' << patterns.probe_frequencies()(l, i);
    }
    out << ',' << patterns.signal()(l) << '\n';
  }
}

void write_probes_csv(std::ostream& out, const std::vector<Complex>& amplitudes) {
  out << "index,re,im,radius\n" << std::setprecision(17);
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    out << (i + 1) << ',' << amplitudes[i].real() << ',' << amplitudes[i].imag() << ','
        << std::abs(amplitudes[i]) << '\n';
  }
}

std::vector<Complex> read_probes_csv(std::istream& in) {
  std::vector<std::string> cells;
  if (!next_data_row(in, cells) || cells.empty() || cells[0] != "index") {
    throw IoError("probes csv: missing header");
  }
  std::vector<Complex> out;
  while (next_data_row(in, cells)) {
    if (cells.size() < 3) throw IoError("probes csv: expected index,re,im columns");
    const int index = parse_cell<int>(cells[0], "index");
    if (index != static_cast<int>(out.size()) + 1) {
      throw IoError("probes csv: indices must run 1..N in order");
    }
    out.emplace_back(parse_cell<double>(cells[1], "re"), parse_cell<double>(cells[2], "im"));
  }
  return out;
}

void write_wigner_csv(std::ostream& out, const std::vector<WignerSample>& grid) {
  out << "re_alpha,im_alpha,W\n" << std::setprecision(17);
  for (const WignerSample& s : grid) out << s.re << ',' << s.im << ',' << s.w << '\n';
}

void write_density_matrix_csv(std::ostream& out, const ComplexMatrix& rho) {
  out << "row,col,re,im\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    for (Eigen::Index c = 0; c < rho.cols(); ++c) {
      out << r << ',' << c << ',' << rho(r, c).real() << ',' << rho(r, c).imag() << '\n';
    }
  }
}

void write_run_table_csv(std::ostream& out, const std::vector<ProbeRunRecord>& runs) {
  out << "probe_count,status,iterations,w0,fidelity,purity,min_eig,final_residual\n"
      << std::setprecision(17);
  for (const ProbeRunRecord& r : runs) {
    out << r.probe_count << ',' << (r.solved ? to_string(r.status) : std::string("error"))
        << ',' << r.iterations << ',' << r.w0 << ',' << r.fidelity << ',' << r.purity << ','
        << r.min_eigenvalue << ',' << r.final_residual << '\n';
  }
}

void write_purity_csv(std::ostream& out, const std::vector<PurityRow>& rows) {
  out << "gamma,purity,mean_fidelity,std_fidelity\n" << std::setprecision(17);
  for (const PurityRow& r : rows) {
    out << r.gamma << ',' << r.purity << ',' << r.mean_fidelity << ',' << r.std_fidelity << '\n';
  }
}

void write_file(const std::filesystem::path& path,
                const std::function<void(std::ostream&)>& fill) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  fill(out);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dpt
