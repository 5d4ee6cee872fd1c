#pragma once

#include <span>
#include <string>
#include <vector>

#include "betaspectra/prufer.hpp"

namespace betaspectra {

struct AtomBatch {
    std::string source;
    std::vector<std::vector<double>> samples;  // each sorted ascending
};

struct GapSample {
    std::vector<double> gaps;  // pooled across samples
    double skip_rate = 0.0;    // fraction of samples with too few atoms
};

// `count` consecutive gaps centered on the atom nearest zero, pooled across
// samples; samples with fewer than count+1 atoms are skipped and reported.
GapSample gaps_near_zero(const AtomBatch& batch, int count);

// Per-sample number of atoms in the closed interval [0, lambda] (atom at 0 counts).
std::vector<long> counting(const AtomBatch& batch, double lambda);

struct CovarianceReport {
    int lag = 0;
    double estimate = 0.0;
    double std_error = 0.0;  // jackknife over trials
    int trials = 0;
    bool degenerate = false;
};

std::vector<CovarianceReport> covariance_lags(const std::vector<SecondOrderSample>& samples,
                                              std::span<const int> lags);

// Two-sample Kolmogorov-Smirnov sup-distance of empirical CDFs.
double ks_distance(std::vector<double> a, std::vector<double> b);

// KS distance between {phase mod 2*pi} and the uniform law on [0, 2*pi).
double phase_uniformity(std::vector<double> phases);

// {statistic, source_a, source_b?, value, std_error, trials, params} as JSON text.
std::string stat_report(const std::string& statistic, const std::string& source_a,
                        const std::string& source_b, double value, double std_error, long trials,
                        const std::string& params_json);

}  // namespace betaspectra
