#pragma once

// CSV tables exchanged with plotting scripts and between CLI subcommands.
// Floating-point columns are written with 17 significant digits so that
// reruns are byte-identical and values round-trip.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dpt/experiment.hpp"
#include "dpt/homodyne.hpp"
#include "dpt/patterns.hpp"

namespace dpt {

// phase_index,bin_index,x_left,x_right,count,frequency
void write_histogram_csv(std::ostream& out, const Histogram& h, const MeasurementConfig& config);
// Shots per phase are recovered from the counts; all phases must agree.
Histogram read_histogram_csv(std::istream& in);

// outcome,phase_index,bin_index,probe_1..probe_N,signal
void write_patterns_csv(std::ostream& out, const PatternMatrix& patterns);

// index,re,im,radius
void write_probes_csv(std::ostream& out, const std::vector<Complex>& amplitudes);
std::vector<Complex> read_probes_csv(std::istream& in);

// re_alpha,im_alpha,W
void write_wigner_csv(std::ostream& out, const std::vector<WignerSample>& grid);

// row,col,re,im
void write_density_matrix_csv(std::ostream& out, const ComplexMatrix& rho);

// probe_count,status,iterations,w0,fidelity,purity,min_eig,final_residual
void write_run_table_csv(std::ostream& out, const std::vector<ProbeRunRecord>& runs);

// gamma,purity,mean_fidelity,std_fidelity
void write_purity_csv(std::ostream& out, const std::vector<PurityRow>& rows);

// Opens path for writing (creating parent directories) and hands the stream
// to fill. Throws IoError on failure.
void write_file(const std::filesystem::path& path,
                const std::function<void(std::ostream&)>& fill);

}  // namespace dpt
