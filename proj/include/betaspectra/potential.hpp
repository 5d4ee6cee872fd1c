#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace betaspectra {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// The manifold is the unit circle (circumference 2*pi) with normalized measure
// and Brownian generator (1/2) d^2/dx^2. All resolvent constants below assume
// this convention.
struct ManifoldSpec {
    double circumference = kTwoPi;
    double generator_factor = 0.5;
};

// F(x) = amplitude * cos(mode * x); mean zero over the circle by construction.
struct PotentialShape {
    int mode = 1;
    double amplitude = kSqrt2;

    double value(double x) const;
};

// Sampled circle-valued Brownian trajectory plus its raw Gaussian increments.
// positions[j+1] = positions[j] + increments[j] (mod 2*pi), positions[0] = 0.
struct DrivingPath {
    double step = 0.0;
    double duration = 0.0;
    std::vector<double> increments;  // i.i.d. N(0, step)
    std::vector<double> positions;   // wrapped to [0, 2*pi)

    std::size_t index_at(double t) const;  // mesh point at or below t
    double position_at(double t) const;
};

// Operator family: coupling lambda_L = L^{-alpha}, the decaying envelope
// a(s) = 1 (s < 1), 1/sqrt(s) (s >= 1), or the reversed form a(horizon - t).
struct CouplingFamily {
    double alpha = 1.0;
    double length = 1.0;
};
struct DecayingFamily {};
struct DecayingReversedFamily {
    double horizon = 1.0;
};

double decay_envelope(double s);  // a(s)

struct PotentialModel {
    std::variant<CouplingFamily, DecayingFamily, DecayingReversedFamily> family;
    PotentialShape shape;

    static PotentialModel coupling(double alpha, double length, PotentialShape shape = {});
    static PotentialModel decaying(PotentialShape shape = {});
    static PotentialModel decaying_reversed(double horizon, PotentialShape shape = {});

    double envelope(double t) const;  // lambda_L resp. a(t) resp. a(horizon - t)
    bool is_coupling() const { return std::holds_alternative<CouplingFamily>(family); }
};

// Resolvent-derived scalars for a chosen shape and reference energy E0.
struct ModelConstants {
    double e0 = 0.0;
    double kappa0 = 0.0;                    // sqrt(E0)
    double c_e0 = 0.0;                      // C(E0) = int |grad (L + 2i sqrt(E0))^{-1} F|^2
    double c_0 = 0.0;                       // C(0)  = int |grad L^{-1} F|^2
    std::complex<double> fg_inner{0.0, 0.0};  // <F g_{kappa0}>
    double beta = 0.0;                      // 8 E0 / C(E0)
    double d_e0 = 0.0;                      // sqrt(C(E0) / (2 E0))

    std::string to_json() const;
    static ModelConstants from_json(const std::string& text);
};

// q(t) = envelope(t) * F(X_t) with piecewise-constant path interpolation.
double potential_at(const DrivingPath& path, const PotentialModel& model, double t);

DrivingPath sample_driving_path(std::uint64_t seed, double duration, double step);

// Scalar c(kappa) with g_kappa(x) = c(kappa) * amplitude * cos(mode x):
// c(kappa) = 1 / (-k^2/2 + 2 i kappa); c(0) = -2 / k^2 (the <F>-projected inverse).
std::complex<double> resolvent_coefficient(const PotentialShape& shape, double kappa);

ModelConstants compute_constants(const PotentialShape& shape, double e0);

// Inverse of E0 -> beta(E0) = 8 E0 / C(E0), strictly increasing; bisection to 1e-10.
double solve_energy_for_beta(const PotentialShape& shape, double beta_target);

}  // namespace betaspectra
