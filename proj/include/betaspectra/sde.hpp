#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "betaspectra/potential.hpp"

namespace betaspectra {

// Shared driving noise for one joint simulation: dZ = dZ_re + i dZ_im with
// independent components (so <Z, Zbar>_t = 2t), plus an independent real B.
// Re(w dZ) is realized as Re(w) dZ_re - Im(w) dZ_im.
struct NoiseBundle {
    double step = 0.0;
    std::vector<double> z_re;  // i.i.d. N(0, step)
    std::vector<double> z_im;
    std::vector<double> b;

    static NoiseBundle sample(std::uint64_t seed, std::size_t steps, double step);
};

enum class SdeKind { schtau, carousel, sinebeta };
const char* to_string(SdeKind kind);

struct SdePath {
    SdeKind kind = SdeKind::schtau;
    double parameter = 0.0;  // c or lambda
    std::vector<double> mesh;
    std::vector<double> psi;  // psi[0] = 0

    double end_time() const { return mesh.empty() ? 0.0 : mesh.back(); }
    double end_value() const { return psi.empty() ? 0.0 : psi.back(); }
};

// Drift constant of the Sch_tau SDE: -Re(i <F g_{kappa0}>) / (2 E0).
double schtau_drift_constant(const ModelConstants& constants);

// d Psi(c) = (2c + d0) dt + (1/sqrt(E0)) { sqrt(C(E0)/2) Re(e^{i Psi} dZ) + sqrt(C(0)) dB },
// Euler-Maruyama on the bundle mesh, all c sharing one bundle.
std::vector<SdePath> simulate_schtau(const ModelConstants& constants, std::span<const double> cs,
                                     const NoiseBundle& noise, double horizon = 1.0);
std::vector<double> simulate_schtau_terminal(const ModelConstants& constants,
                                             std::span<const double> cs,
                                             const NoiseBundle& noise, double horizon = 1.0);

// Atoms {Psi_1^{-1}(2 n pi - 2 beta_phase)} by monotone interpolation of the
// sampled c |-> Psi_1(c). Throws if the samples are non-monotone or the grid
// is too coarse for the observed slope.
std::vector<double> schtau_atoms(const std::vector<SdePath>& paths, double beta_phase);
std::vector<double> schtau_atoms_from_grid(std::span<const double> cs,
                                           std::span<const double> psi_end, double beta_phase);

// d Psi(lambda) = 2 lambda dt + (D/sqrt(1-t)) Re[(e^{i Psi} - 1) dZ] on the
// geometric mesh h_t = h0 (1 - t), stopped at 1 - delta_cutoff.
std::vector<SdePath> simulate_carousel(double d_coeff, std::span<const double> lambdas,
                                       const NoiseBundle& noise, double delta_cutoff = 1e-4,
                                       double h0 = 1e-3);
std::vector<double> simulate_carousel_terminal(double d_coeff, std::span<const double> lambdas,
                                               const NoiseBundle& noise, double delta_cutoff = 1e-4,
                                               double h0 = 1e-3);
std::size_t carousel_steps(double h0, double delta_cutoff);

// d alpha(lambda) = lambda (beta/4) e^{-beta t/4} dt + Re[(e^{i alpha} - 1) dZ],
// uniform mesh of the bundle, up to horizon.
std::vector<SdePath> simulate_sine_beta(double beta, std::span<const double> lambdas,
                                        const NoiseBundle& noise, double horizon);
std::vector<double> simulate_sine_beta_terminal(double beta, std::span<const double> lambdas,
                                                const NoiseBundle& noise, double horizon);
double sine_beta_min_horizon(double beta);  // (beta/4) e^{-beta h/4} <= 1e-6

// t = 1 - e^{-c s}, c = beta/4: s(t) and its inverse.
double carousel_time_change(double t, double beta);
double carousel_time_change_inverse(double s, double beta);

struct PhaseCount {
    long count = 0;       // round(psi / (2 pi))
    double residual = 0.0;  // |psi - 2 pi count|
};
PhaseCount counting_from_phase(double psi_end);

// Jump locations of lambda -> Psi_{1-}(lambda) on [0, lambda_max]: brackets the
// plateau midlevels (2n+1)pi on a coarse grid, then bisects each bracket by
// re-simulating on the same bundle.
std::vector<double> carousel_atoms(double d_coeff, double lambda_max, const NoiseBundle& noise,
                                   double delta_cutoff = 1e-4, double h0 = 1e-3);

}  // namespace betaspectra
