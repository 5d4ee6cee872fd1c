#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "betaspectra/gbeta.hpp"
#include "betaspectra/potential.hpp"
#include "betaspectra/prufer.hpp"
#include "betaspectra/sde.hpp"
#include "betaspectra/statistics.hpp"

namespace betaspectra {

// Reproducible experiment orchestration: deterministic seed fan-out over a
// bounded worker pool, ordered reduction by trial index, CSV + JSON outputs.

struct ExperimentConfig {
    std::string experiment = "clock";

    // model
    double alpha = 1.0;
    double e0 = 1.0;
    double beta_target = 0.0;  // > 0: e0 solved from beta via solve_energy_for_beta
    int k = 1;
    double amplitude = kSqrt2;
    long m = 600;              // length = choose_length(e0, m, beta_phase) when length == 0
    double beta_phase = 0.0;
    double length = 0.0;
    double window = 4.0 * kPi;

    // numerics
    double h = 0.0;            // 0: default_mesh_step(kappa0)
    double h0 = 1e-3;
    double delta_cutoff = 1e-4;
    double horizon = 0.0;      // 0: sine_beta_min_horizon(beta) + 2
    double tol = 0.0;          // 0: default_eig_tol(gbeta_n)

    // experiment extras
    std::vector<double> lambda_values{kTwoPi, 2.0 * kTwoPi};
    int gbeta_n = 400;
    double gbeta_beta = 2.0;
    double gbeta_mu = 0.0;
    double beta_exp = 0.5;
    int gap_count = 2;
    std::vector<int> cov_lags{0, 1, 3};
    int second_order_n = 3;

    // harness
    long trials = 200;
    std::uint64_t base_seed = 20260808;
    int workers = 0;           // 0: hardware concurrency; env BETA_SPECTRA_WORKERS overrides
    std::string out_dir = "out";

    static ExperimentConfig defaults_for(const std::string& experiment);
    static ExperimentConfig from_json(const std::string& text);
    std::string to_json() const;

    PotentialShape shape() const { return PotentialShape{k, amplitude}; }
    double resolved_e0() const;
    double resolved_length(double e0_value) const;
    double resolved_h(double kappa0) const;
};

struct ExperimentResult {
    std::string report_json;
    int exit_code = 0;
    bool passed = false;
    double flag_rate = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Long-format plot data (gap histograms, empirical CDFs, counting
// distributions) derived from the samples embedded in a report.
void emit_plotdata(const std::string& report_json, const std::string& out_dir);

int resolve_workers(int requested);
void parallel_for(long n, int workers, const std::function<void(long)>& fn);

// CSV writers for the external file formats.
void write_window_csv(std::ostream& os, std::uint64_t seed, double alpha,
                      const SpectrumWindow& window);
void write_window_csv_header(std::ostream& os);
void write_sde_csv_header(std::ostream& os);
void write_sde_csv_row(std::ostream& os, std::uint64_t seed, SdeKind kind, double parameter,
                       double t_end, double psi_end);
void write_gbeta_csv_header(std::ostream& os);
void write_gbeta_csv(std::ostream& os, std::uint64_t seed, double beta, const BulkSample& sample);

}  // namespace betaspectra
