#include <algorithm>
#include <cmath>
#include <vector>

#include "betaspectra/gbeta.hpp"
#include "betaspectra/potential.hpp"
#include "betaspectra/prufer.hpp"
#include "betaspectra/rng.hpp"
#include "doctest.h"

using namespace betaspectra;

namespace {

DrivingPath frozen_path(double duration, double step, double position) {
    DrivingPath p;
    p.step = step;
    p.duration = duration;
    const auto n = static_cast<std::size_t>(std::floor(duration / step)) + 1;
    p.positions.assign(n, position);
    p.increments.assign(n - 1, 0.0);
    return p;
}

// Classic RK4 on theta' = kappa - (q/kappa) sin^2(theta), autonomous q.
double rk4_constant_q(double kappa, double q, double horizon, double dt) {
    auto f = [&](double th) {
        const double s = std::sin(th);
        return kappa - q / kappa * s * s;
    };
    double theta = 0.0;
    double t = 0.0;
    while (t < horizon - 1e-15) {
        const double h = std::min(dt, horizon - t);
        const double k1 = f(theta);
        const double k2 = f(theta + 0.5 * h * k1);
        const double k3 = f(theta + 0.5 * h * k2);
        const double k4 = f(theta + h * k3);
        theta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return theta;
}

// Coarsen a path by an integer stride; positions subsample, increments sum.
DrivingPath coarsen(const DrivingPath& fine, int stride) {
    DrivingPath c;
    c.step = fine.step * stride;
    c.duration = fine.duration;
    for (std::size_t i = 0; i < fine.positions.size(); i += static_cast<std::size_t>(stride)) {
        c.positions.push_back(fine.positions[i]);
    }
    c.increments.assign(c.positions.size() - 1, 0.0);
    for (std::size_t i = 0; i + 1 < c.positions.size(); ++i) {
        for (int s = 0; s < stride; ++s) {
            c.increments[i] += fine.increments[i * static_cast<std::size_t>(stride) +
                                               static_cast<std::size_t>(s)];
        }
    }
    return c;
}

}  // namespace

TEST_SUITE("prufer") {
    TEST_CASE("free evolution is exact") {
        const DrivingPath path = sample_driving_path(3, 10.0, 0.01);
        const PotentialModel model = PotentialModel::coupling(1.0, 50.0, {1, 0.0});
        const double kappa = 1.7;
        const PruferPath pp = integrate_prufer(path, model, kappa, 10.0);
        CHECK(pp.theta.back() == doctest::Approx(kappa * 10.0).epsilon(1e-11));
        for (std::size_t j = 0; j < pp.mesh.size(); j += 100) {
            CHECK(pp.theta[j] == doctest::Approx(kappa * pp.mesh[j]).epsilon(1e-11));
        }
        for (double lr : pp.log_r) CHECK(lr == 0.0);
    }

    TEST_CASE("constant-potential phase matches a fine RK4 reference") {
        const double step = 0.001;
        const DrivingPath path = frozen_path(10.0, step, 0.0);
        const PotentialModel model = PotentialModel::coupling(1.0, 10.0, {1, kSqrt2});
        const double q = model.envelope(0.0) * model.shape.value(0.0);
        for (double kappa : {0.7, 1.0, 2.3}) {
            const PruferPath pp = integrate_prufer(path, model, kappa, 10.0);
            const double ref = rk4_constant_q(kappa, q, 10.0, step / 100.0);
            CHECK(std::abs(pp.theta.back() - ref) <= 1e-6);
        }
    }

    TEST_CASE("large kappa stays within the free-phase bound") {
        const DrivingPath path = sample_driving_path(11, 1.0, 1e-4);
        const PotentialModel model = PotentialModel::coupling(1.0, 100.0, {1, kSqrt2});
        const double kappa = 100.0;
        const double q_sup = model.envelope(0.0) * kSqrt2;
        const PruferPath pp = integrate_prufer(path, model, kappa, 1.0);
        CHECK(std::abs(pp.theta.back() - kappa * 1.0) <= q_sup * 1.0 / kappa + 1e-12);
    }

    TEST_CASE("per-step phase increments obey the drift bound") {
        const DrivingPath path = sample_driving_path(5, 20.0, 0.01);
        const PotentialModel model = PotentialModel::coupling(0.6, 20.0, {1, kSqrt2});
        const double kappa = 1.0;
        const double q_sup = model.envelope(0.0) * kSqrt2;
        const PruferPath pp = integrate_prufer(path, model, kappa, 20.0);
        for (std::size_t j = 0; j + 1 < pp.theta.size(); ++j) {
            const double h = pp.mesh[j + 1] - pp.mesh[j];
            CHECK(std::abs(pp.theta[j + 1] - pp.theta[j]) <=
                  kappa * h + h * q_sup / kappa + 1e-12);
        }
    }

    TEST_CASE("batched kernel agrees with the reference integrator") {
        const double length = 50.0;
        const DrivingPath path = sample_driving_path(21, length, 0.01);
        const PotentialModel model = PotentialModel::coupling(0.75, length, {1, kSqrt2});
        const PotentialSample sample = PotentialSample::build(path, model, length);
        std::vector<double> kappas{0.9, 1.0, 1.1};
        const std::vector<double> batch = boundary_phases(sample, kappas);
        for (std::size_t i = 0; i < kappas.size(); ++i) {
            const PruferPath ref = integrate_prufer(path, model, kappas[i], length);
            CHECK(std::abs(batch[i] - ref.theta.back()) <= 1e-9);
        }
    }

    TEST_CASE("boundary phase of the free operator") {
        const DrivingPath path = sample_driving_path(1, 10.0, 0.001);
        const PotentialModel model = PotentialModel::coupling(1.0, 10.0, {1, 0.0});
        const double th_pi = boundary_phase(path, model, kPi, 1.0);
        CHECK(th_pi == doctest::Approx(kPi).epsilon(1e-12));
        const PhaseDecomposition d1 = decompose_phase(th_pi);
        CHECK(d1.multiples == 1);
        CHECK(d1.remainder == doctest::Approx(0.0).epsilon(1e-9));

        const double th_1 = boundary_phase(path, model, 1.0, 1.0);
        CHECK(th_1 == doctest::Approx(1.0).epsilon(1e-12));
        const PhaseDecomposition d2 = decompose_phase(th_1);
        CHECK(d2.multiples == 0);
        CHECK(d2.remainder == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("Sturm counts of the free operator with boundary ties") {
        const DrivingPath path = sample_driving_path(1, 10.0, 0.001);
        const PotentialModel model = PotentialModel::coupling(1.0, 10.0, {1, 0.0});
        CHECK(count_eigenvalues_below(path, model, 3.5, 1.0) == 1);
        CHECK(count_eigenvalues_below(path, model, kPi, 10.0) == 9);
        CHECK(sturm_count_from_phase(10.0 * kPi + 1e-13) == 9);
        CHECK(sturm_count_from_phase(10.0 * kPi - 1e-13) == 9);
        CHECK(sturm_count_from_phase(3.5) == 1);
        CHECK(sturm_count_from_phase(0.0) == 0);
    }

    TEST_CASE("phase decomposition snaps exact multiples") {
        const PhaseDecomposition d = decompose_phase(10.0 * kPi - 1e-13);
        CHECK(d.multiples == 10);
        CHECK(d.remainder == 0.0);
        const PhaseDecomposition e = decompose_phase(1.0);
        CHECK(e.multiples == 0);
        CHECK(e.remainder == 1.0);
    }

    TEST_CASE("choose_length pins the phase condition exactly") {
        CHECK(choose_length(1.0, 100, 0.0) == doctest::Approx(100.0 * kPi).epsilon(1e-15));
        CHECK(choose_length(4.0, 100, 1.0) ==
              doctest::Approx((100.0 * kPi + 1.0) / 2.0).epsilon(1e-15));
        for (double e0 : {0.25, 1.0, 2.7}) {
            const double length = choose_length(e0, 37, 0.5);
            CHECK(std::abs(std::sqrt(e0) * length - 37.0 * kPi - 0.5) <= 1e-10);
        }
        CHECK_THROWS_AS(choose_length(1.0, 0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(choose_length(1.0, 5, kPi), std::invalid_argument);
        CHECK_THROWS_AS(choose_length(-1.0, 5, 0.0), std::invalid_argument);
    }

    TEST_CASE("free operator atoms form the exact clock") {
        const double length = choose_length(1.0, 100, 0.0);  // 100 pi
        const DrivingPath path = sample_driving_path(5, length, 0.01);
        const PotentialModel model = PotentialModel::coupling(1.0, length, {1, 0.0});
        const SpectrumWindow win = locate_atoms(path, model, 1.0, length, 3.5 * kPi);
        REQUIRE(win.atoms.size() == 7);
        for (std::size_t i = 0; i < win.atoms.size(); ++i) {
            const double expected = (static_cast<double>(i) - 3.0) * kPi;
            CHECK(std::abs(win.atoms[i] - expected) <= 1e-8);
        }
        CHECK(win.boundary_phase_m == 100);
        CHECK(win.boundary_phase_phi == 0.0);
        CHECK_FALSE(win.nonmonotone_flag);
        const double span = (win.theta_hi - win.theta_lo) / kPi;
        CHECK(static_cast<long>(win.atoms.size()) == std::lround(span));
    }

    TEST_CASE("a length offset shifts the free atoms") {
        const double length = 100.0 * kPi + 0.5;
        const DrivingPath path = sample_driving_path(5, length, 0.01);
        const PotentialModel model = PotentialModel::coupling(1.0, length, {1, 0.0});
        const SpectrumWindow win = locate_atoms(path, model, 1.0, length, 3.0 * kPi);
        for (double a : win.atoms) {
            const double frac = std::remainder(a + 0.5, kPi);
            CHECK(std::abs(frac) <= 1e-8);
        }
    }

    TEST_CASE("locate_atoms rejects windows reaching kappa <= 0") {
        const DrivingPath path = sample_driving_path(5, 10.0, 0.01);
        const PotentialModel model = PotentialModel::coupling(1.0, 10.0, {1, 0.0});
        CHECK_THROWS_AS(locate_atoms(path, model, 0.01, 10.0, 2.0), std::invalid_argument);
    }

    TEST_CASE("crossing search flags non-monotone grids") {
        std::vector<double> kappas{1.00, 1.01, 1.02, 1.03, 1.04};
        std::vector<double> thetas{0.5, 2.0, 1.8, 4.0, 6.5};
        bool flag = false;
        const auto brackets = detail::find_crossings(kappas, thetas, 0.5, 6.5, flag);
        CHECK(flag);
        REQUIRE(brackets.size() == 2);  // pi in (1.8, 4.0], 2 pi in (4.0, 6.5]
        CHECK(brackets[0].target == doctest::Approx(kPi));
        CHECK(brackets[1].target == doctest::Approx(2.0 * kPi));

        std::vector<double> mono{0.5, 2.0, 3.5, 5.0, 6.5};
        flag = false;
        const auto ok = detail::find_crossings(kappas, mono, 0.5, 6.5, flag);
        CHECK_FALSE(flag);
        CHECK(ok.size() == 2);
    }

    TEST_CASE("second-order spacings of the exact clock vanish") {
        const double length = choose_length(1.0, 100, 0.0);
        const DrivingPath path = sample_driving_path(5, length, 0.01);
        const PotentialModel model = PotentialModel::coupling(1.0, length, {1, 0.0});
        const SpectrumWindow win = locate_atoms(path, model, 1.0, length, 4.5 * kPi);
        const SecondOrderSample x = second_order_spacings(win, 1.0, 2);
        REQUIRE(x.values.size() == 5);
        for (int n = -2; n <= 2; ++n) CHECK(std::abs(x.at(n)) <= 1e-6);
        CHECK_THROWS_WITH_AS(second_order_spacings(win, 1.0, 10) , doctest::Contains("W >="),
                             std::out_of_range);
    }

    TEST_CASE("reversed decaying envelope evaluates a(horizon - t)") {
        const DrivingPath path = frozen_path(10.0, 0.5, 0.0);
        const PotentialModel rev = PotentialModel::decaying_reversed(10.0, {1, kSqrt2});
        const PotentialSample sample = PotentialSample::build(path, rev, 10.0);
        CHECK(sample.q[0] == doctest::Approx(decay_envelope(10.0) * kSqrt2).epsilon(1e-14));
        CHECK(sample.q[4] == doctest::Approx(decay_envelope(8.0) * kSqrt2).epsilon(1e-14));
        CHECK(sample.q.back() == doctest::Approx(kSqrt2).epsilon(1e-14));
    }

    TEST_CASE("integrator argument validation") {
        const DrivingPath path = sample_driving_path(9, 5.0, 0.01);
        const PotentialModel model = PotentialModel::decaying({1, kSqrt2});
        CHECK_THROWS_AS(integrate_prufer(path, model, 0.0, 5.0), std::invalid_argument);
        CHECK_THROWS_AS(integrate_prufer(path, model, 1.0, 6.0), std::out_of_range);
    }
}

TEST_SUITE("prufer_statistical") {
    TEST_CASE("weak coupling keeps the boundary phase near the free one") {
        const double length = 500.0;
        const PotentialModel model = PotentialModel::coupling(1.0, length, {1, kSqrt2});
        int within = 0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            const DrivingPath path = sample_driving_path(trial_seed(777, s), length, 0.01);
            const double th = boundary_phase(path, model, 1.0, length);
            if (std::abs(th - length) <= 0.2) ++within;
        }
        CHECK(within >= 95);
    }

    TEST_CASE("window atom count concentrates at 2W/pi") {
        const double length = 1000.0;
        const PotentialModel model = PotentialModel::coupling(1.0, length, {1, kSqrt2});
        const double window = 5.0 * kPi;
        for (int s = 0; s < 100; ++s) {
            const DrivingPath path = sample_driving_path(trial_seed(4242, s), length, 0.01);
            const SpectrumWindow win = locate_atoms(path, model, 1.0, length, window);
            CHECK_FALSE(win.nonmonotone_flag);
            CHECK(std::abs(static_cast<long>(win.atoms.size()) - 10) <= 1);
        }
    }

    TEST_CASE("Sturm counts match a finite-difference eigensolver oracle") {
        const double length = 20.0;
        const double fd_step = 0.001;
        const PotentialModel model = PotentialModel::coupling(0.6, length, {1, kSqrt2});
        const int interior = static_cast<int>(std::lround(length / fd_step)) - 1;
        for (int s = 0; s < 50; ++s) {
            const DrivingPath path = sample_driving_path(trial_seed(31337, s), length, 0.01);
            TridiagonalMatrix fd;
            fd.n = interior;
            fd.diag.resize(static_cast<std::size_t>(interior));
            fd.offdiag.assign(static_cast<std::size_t>(interior) - 1, 1.0 / (fd_step * fd_step));
            for (int i = 0; i < interior; ++i) {
                const double x = (static_cast<double>(i) + 1.0) * fd_step;
                fd.diag[static_cast<std::size_t>(i)] =
                    2.0 / (fd_step * fd_step) + potential_at(path, model, x);
            }
            const long fd_count = sturm_count_below(fd, 1.0);
            const long prufer_count = count_eigenvalues_below(path, model, 1.0, length);
            CHECK(std::abs(fd_count - prufer_count) <= 1);
        }
    }

    TEST_CASE("atoms converge first-order under mesh halving") {
        const double length = 200.0;
        const PotentialModel model = PotentialModel::coupling(0.75, length, {1, kSqrt2});
        const double h_fine = 0.0025;
        const DrivingPath fine = sample_driving_path(606, length, h_fine);
        const DrivingPath mid = coarsen(fine, 2);   // h = 0.005
        const DrivingPath coarse = coarsen(fine, 4);  // h = 0.01
        const SpectrumWindow w_c = locate_atoms(coarse, model, 1.0, length, 2.0 * kPi);
        const SpectrumWindow w_m = locate_atoms(mid, model, 1.0, length, 2.0 * kPi);
        const SpectrumWindow w_f = locate_atoms(fine, model, 1.0, length, 2.0 * kPi);
        REQUIRE(w_c.atoms.size() == w_m.atoms.size());
        REQUIRE(w_m.atoms.size() == w_f.atoms.size());
        for (std::size_t i = 0; i < w_c.atoms.size(); ++i) {
            const double change1 = std::abs(w_m.atoms[i] - w_c.atoms[i]);
            const double change2 = std::abs(w_f.atoms[i] - w_m.atoms[i]);
            CHECK(change2 <= 4.0 * change1 + 1e-9);
        }
    }

    TEST_CASE("critical-coupling radius stays bounded on most paths") {
        const double length = 2000.0;
        const PotentialModel model = PotentialModel::coupling(0.5, length, {1, kSqrt2});
        int exceed = 0;
        const int seeds = 500;
        const double bound = std::log(10.0);
        for (int s = 0; s < seeds; ++s) {
            const DrivingPath path = sample_driving_path(trial_seed(90210, s), length, 0.01);
            const PotentialSample sample = PotentialSample::build(path, model, length);
            if (final_phase(sample, 1.0).max_abs_log_r > bound) ++exceed;
        }
        CHECK(exceed <= seeds / 10);
    }
}
