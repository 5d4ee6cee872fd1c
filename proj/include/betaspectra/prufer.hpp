#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "betaspectra/potential.hpp"

namespace betaspectra {

// Prüfer phase/radius state along a sampled potential:
//   theta' = kappa - q(t) sin^2(theta) / kappa,
//   (log r)' = q(t) sin(2 theta) / (2 kappa),
// integrated by the explicit midpoint rule on the path mesh.
struct PruferPath {
    double kappa = 0.0;
    std::vector<double> mesh;
    std::vector<double> theta;   // unwrapped, theta[0] = 0
    std::vector<double> log_r;   // log_r[0] = 0
};

// Potential samples on the shared mesh, reusable across kappa evaluations.
struct PotentialSample {
    double step = 0.0;
    double horizon = 0.0;        // integration end time T
    std::vector<double> q;       // q at mesh points 0..n_full (piecewise constant)
    double q_max_abs = 0.0;

    static PotentialSample build(const DrivingPath& path, const PotentialModel& model, double horizon);
    std::size_t full_steps() const;
    double last_step() const;    // horizon - full_steps()*step, in [0, step)
    std::size_t fast_split_index(double q_threshold) const;

    std::vector<double> suffix_max_;  // suffix max of |q|, for kernel dispatch
};

struct PhaseResult {
    double theta = 0.0;
    double log_r = 0.0;
    double max_abs_log_r = 0.0;
};

// theta = m*pi + phi with m integral and phi in [0, pi); exact multiples snap.
struct PhaseDecomposition {
    long multiples = 0;
    double remainder = 0.0;
};
PhaseDecomposition decompose_phase(double theta);

double default_mesh_step(double kappa0);  // min(0.01, 0.02/kappa0)

PruferPath integrate_prufer(const DrivingPath& path, const PotentialModel& model,
                            double kappa, double horizon);

// Terminal phase/radius without path storage; same scheme as integrate_prufer.
PhaseResult final_phase(const PotentialSample& sample, double kappa);

// Batched terminal phases over one shared potential sample.
std::vector<double> boundary_phases(const PotentialSample& sample, std::span<const double> kappas);

// theta_{L,L}(kappa) convenience wrapper.
double boundary_phase(const DrivingPath& path, const PotentialModel& model,
                      double kappa, double length);

// floor(theta_{L,L}(kappa)/pi) with exact multiples tie-broken downward:
// the Sturm oscillation count of eigenvalues strictly below kappa^2.
long count_eigenvalues_below(const DrivingPath& path, const PotentialModel& model,
                             double kappa, double length);
long sturm_count_from_phase(double theta);

// Atoms of xi_L in the window [-W, W] around E0: all kappa with
// theta_{L,L}(kappa) in pi*Z, located on a grid of resolution (pi/L)/8 and
// refined by bracketed interpolation-bisection to |dkappa| <= 1e-10 * kappa0.
struct SpectrumWindow {
    double e0 = 0.0;
    double length = 0.0;
    double window = 0.0;
    std::vector<double> atoms;    // x_n = L (kappa_n - kappa0), increasing
    std::vector<double> kappas;
    long boundary_phase_m = 0;    // theta_{L,L}(kappa0) = m*pi + phi
    double boundary_phase_phi = 0.0;
    double theta_lo = 0.0;        // theta at kappa0 - W/L
    double theta_hi = 0.0;        // theta at kappa0 + W/L
    bool nonmonotone_flag = false;
};

SpectrumWindow locate_atoms(const DrivingPath& path, const PotentialModel& model,
                            double e0, double length, double window);

// L = (m*pi + beta_phase)/sqrt(E0); makes sqrt(E0)*L = m*pi + beta_phase exact.
double choose_length(double e0, long m, double beta_phase);

// X(n) = {(kappa_{m+n+1} - kappa_{m+n}) * L - pi} * L^{alpha - 1/2}, n in {-N..N},
// m the index of the atom nearest zero.
struct SecondOrderSample {
    double length = 0.0;
    double alpha = 0.0;
    int half_width = 0;
    std::vector<double> values;  // size 2*half_width + 1, index n + half_width

    double at(int n) const { return values[static_cast<std::size_t>(n + half_width)]; }
};

SecondOrderSample second_order_spacings(const SpectrumWindow& window, double alpha, int half_width);

namespace detail {
// Crossing search on precomputed grid phases; exposed for targeted tests of
// the non-monotone fallback.
struct GridCrossing {
    double kappa_lo = 0.0, kappa_hi = 0.0;
    double theta_lo = 0.0, theta_hi = 0.0;
    double target = 0.0;  // n*pi
};
std::vector<GridCrossing> find_crossings(std::span<const double> kappas,
                                         std::span<const double> thetas,
                                         double target_lo, double target_hi,
                                         bool& nonmonotone);
}  // namespace detail

}  // namespace betaspectra
