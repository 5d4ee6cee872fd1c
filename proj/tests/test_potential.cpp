#include <cmath>
#include <complex>
#include <set>
#include <string>

#include "betaspectra/potential.hpp"
#include "betaspectra/rng.hpp"
#include "betaspectra/statistics.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace betaspectra;

namespace {

constexpr int kQuadNodes = 1 << 14;

// Normalized trapezoid quadrature over the circle (periodic, so plain average).
template <typename F>
double circle_mean(F&& f) {
    double sum = 0.0;
    for (int i = 0; i < kQuadNodes; ++i) {
        sum += f(kTwoPi * (static_cast<double>(i) + 0.5) / kQuadNodes);
    }
    return sum / kQuadNodes;
}

// |grad g_kappa|^2 with the gradient taken symbolically: d/dx cos(kx) = -k sin(kx).
double quadrature_c(const PotentialShape& shape, double kappa) {
    const std::complex<double> c = resolvent_coefficient(shape, kappa);
    const double k = shape.mode;
    return circle_mean([&](double x) {
        const std::complex<double> grad = -c * shape.amplitude * k * std::sin(k * x);
        return std::norm(grad);
    });
}

}  // namespace

TEST_SUITE("potential") {
    TEST_CASE("manifold measure is normalized and F has mean zero") {
        CHECK(circle_mean([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-14));
        for (int k = 1; k <= 3; ++k) {
            const PotentialShape shape{k, kSqrt2};
            CHECK(std::abs(circle_mean([&](double x) { return shape.value(x); })) <= 1e-12);
        }
    }

    TEST_CASE("resolvent coefficient closed forms") {
        CHECK(resolvent_coefficient({1, kSqrt2}, 0.0) == std::complex<double>(-2.0, 0.0));
        CHECK(resolvent_coefficient({2, kSqrt2}, 0.0) == std::complex<double>(-0.5, 0.0));
        const std::complex<double> c = resolvent_coefficient({1, kSqrt2}, 1.0);
        CHECK(std::abs(c - std::complex<double>(-2.0 / 17.0, -8.0 / 17.0)) <= 1e-15);
    }

    TEST_CASE("resolvent solves (L + 2i kappa) g = F, by symbolic differentiation") {
        for (int k : {1, 2, 3}) {
            for (double kappa : {0.3, 1.0, 4.2}) {
                const PotentialShape shape{k, kSqrt2};
                const std::complex<double> c = resolvent_coefficient(shape, kappa);
                // g = c A cos(kx): (1/2) g'' = -(k^2/2) g, so the equation reduces to
                // c (-k^2/2 + 2 i kappa) = 1 componentwise.
                const double a = c.real(), b = c.imag();
                const double k2 = static_cast<double>(k) * k;
                CHECK(std::abs(-0.5 * k2 * a - 2.0 * kappa * b - 1.0) <= 1e-14);
                CHECK(std::abs(-0.5 * k2 * b + 2.0 * kappa * a) <= 1e-14);
            }
        }
    }

    TEST_CASE("closed-form C(E) matches quadrature oracle") {
        for (int k : {1, 2, 3}) {
            for (double e : {0.1, 1.0, 10.0}) {
                const PotentialShape shape{k, kSqrt2};
                const ModelConstants mc = compute_constants(shape, e);
                CHECK(std::abs(mc.c_e0 - quadrature_c(shape, std::sqrt(e))) <= 1e-10);
            }
        }
        const PotentialShape k1{1, kSqrt2};
        CHECK(std::abs(quadrature_c(k1, 0.25) - 2.0) <= 1e-10);
        CHECK(compute_constants(k1, 1.0 / 16.0).c_e0 == doctest::Approx(2.0).epsilon(1e-12));
    }

    TEST_CASE("C(E) is continuous at E -> 0") {
        const PotentialShape shape{1, kSqrt2};
        const ModelConstants near_zero = compute_constants(shape, 1e-12);
        CHECK(std::abs(near_zero.c_e0 - near_zero.c_0) <= 1e-9);
    }

    TEST_CASE("conjugate symmetry of the gradient pairing") {
        for (int k : {1, 2, 3}) {
            const PotentialShape shape{k, kSqrt2};
            const double kappa = 0.85;
            const std::complex<double> cp = resolvent_coefficient(shape, kappa);
            const double k2 = static_cast<double>(k) * k;
            const std::complex<double> cm = 1.0 / std::complex<double>(-0.5 * k2, -2.0 * kappa);
            const double mixed = circle_mean([&](double x) {
                const double s = shape.amplitude * k * std::sin(k * x);
                return (cp * cm * s * s).real();
            });
            const double direct = quadrature_c(shape, kappa);
            CHECK(std::abs(mixed - direct) <= 1e-10);
        }
    }

    TEST_CASE("model constants identities") {
        const ModelConstants mc = compute_constants({1, kSqrt2}, 1.0);
        CHECK(std::abs(mc.beta * mc.c_e0 - 8.0 * mc.e0) <= 1e-12 * 8.0 * mc.e0);
        CHECK(std::abs(mc.d_e0 * mc.d_e0 * 2.0 * mc.e0 - mc.c_e0) <= 1e-12 * mc.c_e0);
        CHECK(mc.beta == doctest::Approx(34.0).epsilon(1e-12));
    }

    TEST_CASE("solve_energy_for_beta hits its target and round-trips") {
        const PotentialShape shape{1, kSqrt2};
        const double e2 = solve_energy_for_beta(shape, 2.0);
        // beta(E) = 2 at the positive root of 16 E^2 + E - 1 = 0
        const double root = (-1.0 + std::sqrt(65.0)) / 32.0;
        CHECK(std::abs(e2 - root) <= 1e-9);
        CHECK(std::abs(compute_constants(shape, e2).beta - 2.0) <= 1e-10);

        const double b1 = compute_constants(shape, 1.0).beta;
        CHECK(std::abs(solve_energy_for_beta(shape, b1) - 1.0) <= 1e-10);

        CHECK(solve_energy_for_beta(shape, 1e-6) <= 1e-6);  // E0 -> 0 with beta -> 0

        Rng rng(1234);
        for (int i = 0; i < 50; ++i) {
            const double e0 = 0.05 + 4.95 * rng.uniform();
            const double beta = compute_constants(shape, e0).beta;
            CHECK(std::abs(solve_energy_for_beta(shape, beta) - e0) <= 1e-8);
        }
    }

    TEST_CASE("driving path single-step consistency and determinism") {
        const DrivingPath p = sample_driving_path(42, 1.0, 1.0);
        REQUIRE(p.positions.size() == 2);
        const double wrapped = p.positions[1] - p.positions[0];
        const double diff = std::remainder(wrapped - p.increments[0], kTwoPi);
        CHECK(std::abs(diff) <= 1e-12);

        const DrivingPath q = sample_driving_path(42, 1.0, 1.0);
        CHECK(p.positions == q.positions);
        CHECK(p.increments == q.increments);

        CHECK_THROWS_AS(sample_driving_path(1, -1.0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(sample_driving_path(1, 1.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(sample_driving_path(1, 1.0, 2.0), std::invalid_argument);
    }

    TEST_CASE("potential evaluation on the two families") {
        DrivingPath still;  // frozen path for pointwise checks
        still.step = 1.0;
        still.duration = 5.0;
        still.positions.assign(6, 0.0);
        still.increments.assign(5, 0.0);

        const PotentialModel zero = PotentialModel::coupling(1.0, 100.0, {1, 0.0});
        for (double t : {0.0, 1.5, 4.0}) CHECK(potential_at(still, zero, t) == 0.0);

        const PotentialModel dec = PotentialModel::decaying({1, kSqrt2});
        CHECK(potential_at(still, dec, 4.0) == doctest::Approx(kSqrt2 / 2.0).epsilon(1e-14));
        CHECK(potential_at(still, dec, 0.5) == doctest::Approx(kSqrt2).epsilon(1e-14));

        DrivingPath at_half_pi = still;
        at_half_pi.positions.assign(6, kPi / 2.0);
        const PotentialModel cpl = PotentialModel::coupling(1.0, 100.0, {1, kSqrt2});
        CHECK(std::abs(potential_at(at_half_pi, cpl, 2.0)) <= 1e-15);

        CHECK_THROWS_AS(potential_at(still, dec, -0.5), std::out_of_range);
        CHECK_THROWS_AS(potential_at(still, dec, 5.5), std::out_of_range);

        const PotentialModel rev = PotentialModel::decaying_reversed(5.0, {1, kSqrt2});
        CHECK(potential_at(still, rev, 1.0) ==
              doctest::Approx(decay_envelope(4.0) * kSqrt2).epsilon(1e-14));
        CHECK(potential_at(still, rev, 4.8) == doctest::Approx(kSqrt2).epsilon(1e-14));
    }

    TEST_CASE("constants serialize with the exact field names") {
        const ModelConstants mc = compute_constants({1, kSqrt2}, 0.5);
        const auto j = nlohmann::json::parse(mc.to_json());
        std::set<std::string> keys;
        for (const auto& item : j.items()) keys.insert(item.key());
        CHECK(keys == std::set<std::string>{"e0", "kappa0", "c_e0", "c_0", "fg_inner_re",
                                            "fg_inner_im", "beta", "d_e0"});
        const ModelConstants back = ModelConstants::from_json(mc.to_json());
        CHECK(back.e0 == mc.e0);
        CHECK(back.c_e0 == mc.c_e0);
        CHECK(back.fg_inner == mc.fg_inner);
    }

    TEST_CASE("parameter errors") {
        CHECK_THROWS_AS(compute_constants({1, kSqrt2}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(compute_constants({1, kSqrt2}, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(solve_energy_for_beta({1, kSqrt2}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(resolvent_coefficient({1, kSqrt2}, -0.5), std::invalid_argument);
    }
}

TEST_SUITE("potential_statistical") {
    TEST_CASE("increment variance obeys the law of large numbers") {
        const double step = 1e-3;
        const DrivingPath p = sample_driving_path(987, 1000.0, step);
        REQUIRE(p.increments.size() == 1000000);
        double sum2 = 0.0;
        for (double dx : p.increments) sum2 += dx * dx;
        const double var = sum2 / static_cast<double>(p.increments.size());
        CHECK(std::abs(var / step - 1.0) <= 0.01);
    }

    TEST_CASE("wrapped positions at long times are uniform across seeds") {
        std::vector<double> finals;
        finals.reserve(10000);
        for (int s = 0; s < 10000; ++s) {
            const DrivingPath p = sample_driving_path(trial_seed(555, s), 50.0, 0.5);
            finals.push_back(p.positions.back());
        }
        CHECK(phase_uniformity(finals) <= 0.02);
    }
}
