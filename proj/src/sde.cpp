#include "betaspectra/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "betaspectra/rng.hpp"

namespace betaspectra {

namespace {

// Unit-phase state advanced by exact-angle rotations with periodic resync;
// equivalent to sincos(psi) per step up to accumulated roundoff.
struct PhaseTrig {
    double c = 1.0, s = 0.0;

    void rotate(double d) {
        if (std::abs(d) < 0.05) {
            const double d2 = d * d;
            const double sd = d * (1.0 - d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0)));
            const double cd =
                1.0 - 0.5 * d2 * (1.0 - d2 / 12.0 * (1.0 - d2 / 30.0 * (1.0 - d2 / 56.0)));
            const double cn = c * cd - s * sd;
            const double sn = s * cd + c * sd;
            const double fix = 0.5 * (3.0 - (cn * cn + sn * sn));
            c = cn * fix;
            s = sn * fix;
        } else {
            const double cd = std::cos(d);
            const double sd = std::sin(d);
            const double cn = c * cd - s * sd;
            const double sn = s * cd + c * sd;
            c = cn;
            s = sn;
        }
    }

    void resync(double psi) {
        c = std::cos(psi);
        s = std::sin(psi);
    }
};

constexpr int kResyncPeriod = 512;

void check_nonempty(std::span<const double> params) {
    if (params.empty()) throw std::invalid_argument("parameter array must not be empty");
}

}  // namespace

const char* to_string(SdeKind kind) {
    switch (kind) {
        case SdeKind::schtau: return "schtau";
        case SdeKind::carousel: return "carousel";
        case SdeKind::sinebeta: return "sinebeta";
    }
    return "unknown";
}

NoiseBundle NoiseBundle::sample(std::uint64_t seed, std::size_t steps, double step) {
    if (step <= 0.0) throw std::invalid_argument("noise step must be positive");
    NoiseBundle nb;
    nb.step = step;
    nb.z_re.resize(steps);
    nb.z_im.resize(steps);
    nb.b.resize(steps);
    Rng rng(seed);
    const double sigma = std::sqrt(step);
    for (std::size_t j = 0; j < steps; ++j) {
        nb.z_re[j] = sigma * rng.gaussian();
        nb.z_im[j] = sigma * rng.gaussian();
        nb.b[j] = sigma * rng.gaussian();
    }
    return nb;
}

double schtau_drift_constant(const ModelConstants& constants) {
    // -Re(i <F g>) / (2 E0) = Im <F g> / (2 E0)
    return constants.fg_inner.imag() / (2.0 * constants.e0);
}

namespace {

template <typename Observer>
void run_schtau(const ModelConstants& constants, std::span<const double> cs,
                const NoiseBundle& noise, double horizon, Observer&& observe) {
    check_nonempty(cs);
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / noise.step - 1e-12));
    if (noise.z_re.size() < steps) {
        throw std::invalid_argument("noise bundle does not cover the horizon; need " +
                                    std::to_string(steps) + " steps");
    }
    const double d0 = schtau_drift_constant(constants);
    const double inv_sqrt_e0 = 1.0 / std::sqrt(constants.e0);
    const double amp_z = inv_sqrt_e0 * std::sqrt(0.5 * constants.c_e0);
    const double amp_b = inv_sqrt_e0 * std::sqrt(constants.c_0);

    const std::size_t m = cs.size();
    std::vector<double> psi(m, 0.0);
    std::vector<PhaseTrig> trig(m);
    observe(0, 0.0, psi);
    double t = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
        const double h = std::min(noise.step, horizon - t);
        if (h <= 0.0) break;
        const double scale = std::sqrt(h / noise.step);
        const double dzr = scale * noise.z_re[j];
        const double dzi = scale * noise.z_im[j];
        const double db = scale * noise.b[j];
        for (std::size_t i = 0; i < m; ++i) {
            const double dpsi = (2.0 * cs[i] + d0) * h +
                                amp_z * (trig[i].c * dzr - trig[i].s * dzi) + amp_b * db;
            psi[i] += dpsi;
            trig[i].rotate(dpsi);
        }
        if ((j + 1) % kResyncPeriod == 0) {
            for (std::size_t i = 0; i < m; ++i) trig[i].resync(psi[i]);
        }
        t += h;
        observe(j + 1, t, psi);
    }
}

template <typename Observer>
void run_carousel(double d_coeff, std::span<const double> lambdas, const NoiseBundle& noise,
                  double delta_cutoff, double h0, Observer&& observe) {
    check_nonempty(lambdas);
    if (!(delta_cutoff > 0.0 && delta_cutoff < 0.1)) {
        throw std::invalid_argument("delta_cutoff must lie in (0, 0.1)");
    }
    if (h0 <= 0.0 || h0 >= 1.0) throw std::invalid_argument("h0 must lie in (0, 1)");
    const std::size_t steps = carousel_steps(h0, delta_cutoff);
    if (noise.z_re.size() < steps) {
        throw std::invalid_argument("noise bundle does not cover the carousel mesh; need " +
                                    std::to_string(steps) + " steps");
    }
    const double t_end = 1.0 - delta_cutoff;
    const std::size_t m = lambdas.size();
    std::vector<double> psi(m, 0.0);
    std::vector<PhaseTrig> trig(m);
    observe(0, 0.0, psi);
    double t = 0.0;
    std::size_t j = 0;
    while (t < t_end && j < steps) {
        const double h = std::min(h0 * (1.0 - t), t_end - t);
        const double scale = std::sqrt(h / noise.step);
        const double dzr = scale * noise.z_re[j];
        const double dzi = scale * noise.z_im[j];
        const double coeff = d_coeff / std::sqrt(1.0 - t);
        for (std::size_t i = 0; i < m; ++i) {
            const double dpsi = 2.0 * lambdas[i] * h +
                                coeff * ((trig[i].c - 1.0) * dzr - trig[i].s * dzi);
            psi[i] += dpsi;
            trig[i].rotate(dpsi);
        }
        if ((j + 1) % kResyncPeriod == 0) {
            for (std::size_t i = 0; i < m; ++i) trig[i].resync(psi[i]);
        }
        t += h;
        ++j;
        observe(j, t, psi);
    }
}

template <typename Observer>
void run_sine_beta(double beta, std::span<const double> lambdas, const NoiseBundle& noise,
                   double horizon, Observer&& observe) {
    check_nonempty(lambdas);
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
    const double h_min = sine_beta_min_horizon(beta);
    if (horizon < h_min) {
        throw std::invalid_argument("horizon too small; need at least " + std::to_string(h_min));
    }
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / noise.step - 1e-12));
    if (noise.z_re.size() < steps) {
        throw std::invalid_argument("noise bundle does not cover the horizon; need " +
                                    std::to_string(steps) + " steps");
    }
    const std::size_t m = lambdas.size();
    std::vector<double> alpha(m, 0.0);
    std::vector<PhaseTrig> trig(m);
    observe(0, 0.0, alpha);
    double t = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
        const double h = std::min(noise.step, horizon - t);
        if (h <= 0.0) break;
        const double scale = std::sqrt(h / noise.step);
        const double dzr = scale * noise.z_re[j];
        const double dzi = scale * noise.z_im[j];
        const double drift = 0.25 * beta * std::exp(-0.25 * beta * t) * h;
        for (std::size_t i = 0; i < m; ++i) {
            const double da = lambdas[i] * drift +
                              (trig[i].c - 1.0) * dzr - trig[i].s * dzi;
            alpha[i] += da;
            trig[i].rotate(da);
        }
        if ((j + 1) % kResyncPeriod == 0) {
            for (std::size_t i = 0; i < m; ++i) trig[i].resync(alpha[i]);
        }
        t += h;
        observe(j + 1, t, alpha);
    }
}

template <typename Runner>
std::vector<SdePath> collect_paths(SdeKind kind, std::span<const double> params, Runner&& run) {
    std::vector<SdePath> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        out[i].kind = kind;
        out[i].parameter = params[i];
    }
    run([&out](std::size_t, double t, const std::vector<double>& psi) {
        for (std::size_t i = 0; i < psi.size(); ++i) {
            out[i].mesh.push_back(t);
            out[i].psi.push_back(psi[i]);
        }
    });
    return out;
}

template <typename Runner>
std::vector<double> collect_terminal(std::size_t m, Runner&& run) {
    std::vector<double> last(m, 0.0);
    run([&last](std::size_t, double, const std::vector<double>& psi) {
        for (std::size_t i = 0; i < psi.size(); ++i) last[i] = psi[i];
    });
    return last;
}

}  // namespace

std::vector<SdePath> simulate_schtau(const ModelConstants& constants, std::span<const double> cs,
                                     const NoiseBundle& noise, double horizon) {
    return collect_paths(SdeKind::schtau, cs, [&](auto&& obs) {
        run_schtau(constants, cs, noise, horizon, obs);
    });
}

std::vector<double> simulate_schtau_terminal(const ModelConstants& constants,
                                             std::span<const double> cs, const NoiseBundle& noise,
                                             double horizon) {
    return collect_terminal(cs.size(), [&](auto&& obs) {
        run_schtau(constants, cs, noise, horizon, obs);
    });
}

std::vector<SdePath> simulate_carousel(double d_coeff, std::span<const double> lambdas,
                                       const NoiseBundle& noise, double delta_cutoff, double h0) {
    return collect_paths(SdeKind::carousel, lambdas, [&](auto&& obs) {
        run_carousel(d_coeff, lambdas, noise, delta_cutoff, h0, obs);
    });
}

std::vector<double> simulate_carousel_terminal(double d_coeff, std::span<const double> lambdas,
                                               const NoiseBundle& noise, double delta_cutoff,
                                               double h0) {
    return collect_terminal(lambdas.size(), [&](auto&& obs) {
        run_carousel(d_coeff, lambdas, noise, delta_cutoff, h0, obs);
    });
}

std::size_t carousel_steps(double h0, double delta_cutoff) {
    // 1 - t_{j+1} = (1 - t_j)(1 - h0) until 1 - t <= delta_cutoff, plus the clamp step.
    const double n = std::log(delta_cutoff) / std::log1p(-h0);
    return static_cast<std::size_t>(std::ceil(n)) + 2;
}

std::vector<SdePath> simulate_sine_beta(double beta, std::span<const double> lambdas,
                                        const NoiseBundle& noise, double horizon) {
    return collect_paths(SdeKind::sinebeta, lambdas, [&](auto&& obs) {
        run_sine_beta(beta, lambdas, noise, horizon, obs);
    });
}

std::vector<double> simulate_sine_beta_terminal(double beta, std::span<const double> lambdas,
                                                const NoiseBundle& noise, double horizon) {
    return collect_terminal(lambdas.size(), [&](auto&& obs) {
        run_sine_beta(beta, lambdas, noise, horizon, obs);
    });
}

double sine_beta_min_horizon(double beta) {
    return (4.0 / beta) * std::log(beta / (4.0 * 1e-6));
}

double carousel_time_change(double t, double beta) {
    if (t < 0.0 || t >= 1.0) throw std::out_of_range("time change needs t in [0, 1)");
    return -(4.0 / beta) * std::log1p(-t);
}

double carousel_time_change_inverse(double s, double beta) {
    if (s < 0.0) throw std::out_of_range("time change inverse needs s >= 0");
    return 1.0 - std::exp(-0.25 * beta * s);
}

PhaseCount counting_from_phase(double psi_end) {
    const long n = std::lround(psi_end / kTwoPi);
    return PhaseCount{n, std::abs(psi_end - kTwoPi * static_cast<double>(n))};
}

std::vector<double> schtau_atoms_from_grid(std::span<const double> cs,
                                           std::span<const double> psi_end, double beta_phase) {
    if (cs.size() != psi_end.size() || cs.size() < 2) {
        throw std::invalid_argument("need matching c/psi grids with at least two points");
    }
    double max_slope = 0.0;
    for (std::size_t i = 0; i + 1 < cs.size(); ++i) {
        const double dc = cs[i + 1] - cs[i];
        const double dpsi = psi_end[i + 1] - psi_end[i];
        if (dc <= 0.0) throw std::invalid_argument("c grid must be strictly increasing");
        if (dpsi < 0.0) {
            throw std::runtime_error("Psi_1 samples non-monotone; refine the c grid");
        }
        max_slope = std::max(max_slope, dpsi / dc);
    }
    const double spacing = cs[1] - cs[0];
    if (max_slope > 0.0 && spacing > kPi / (8.0 * max_slope) * (1.0 + 1e-9)) {
        throw std::runtime_error("c grid too coarse for the observed slope; refine the c grid");
    }

    std::vector<double> atoms;
    const double lo = psi_end.front();
    const double hi = psi_end.back();
    const long n_min = static_cast<long>(std::ceil((lo + 2.0 * beta_phase) / kTwoPi - 1e-12));
    const long n_max = static_cast<long>(std::floor((hi + 2.0 * beta_phase) / kTwoPi + 1e-12));
    std::size_t j = 0;
    for (long n = n_min; n <= n_max; ++n) {
        const double target = kTwoPi * static_cast<double>(n) - 2.0 * beta_phase;
        while (j + 1 < psi_end.size() && psi_end[j + 1] < target) ++j;
        if (j + 1 >= psi_end.size()) break;
        const double den = psi_end[j + 1] - psi_end[j];
        const double frac = den > 0.0 ? (target - psi_end[j]) / den : 0.5;
        atoms.push_back(cs[j] + frac * (cs[j + 1] - cs[j]));
    }
    return atoms;
}

std::vector<double> schtau_atoms(const std::vector<SdePath>& paths, double beta_phase) {
    if (paths.empty()) throw std::invalid_argument("no paths given");
    std::vector<double> cs(paths.size());
    std::vector<double> psi(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        cs[i] = paths[i].parameter;
        psi[i] = paths[i].end_value();
    }
    return schtau_atoms_from_grid(cs, psi, beta_phase);
}

std::vector<double> carousel_atoms(double d_coeff, double lambda_max, const NoiseBundle& noise,
                                   double delta_cutoff, double h0) {
    if (lambda_max <= 0.0) throw std::invalid_argument("lambda_max must be positive");
    const double coarse = kPi / 8.0;
    const auto n_grid = static_cast<std::size_t>(std::ceil(lambda_max / coarse)) + 1;
    std::vector<double> grid(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        grid[i] = std::min(lambda_max, static_cast<double>(i) * coarse);
    }
    const std::vector<double> psi =
        simulate_carousel_terminal(d_coeff, grid, noise, delta_cutoff, h0);

    const auto eval_single = [&](double lam) {
        const double one[1] = {lam};
        return simulate_carousel_terminal(d_coeff, one, noise, delta_cutoff, h0)[0];
    };

    std::vector<double> atoms;
    // Plateau midlevels (2n+1)pi separate consecutive 2*pi*Z locking levels.
    const long n_max = static_cast<long>(std::floor(psi.back() / kTwoPi + 0.5));
    long n = 0;
    for (std::size_t j = 0; j + 1 < grid.size() && n < n_max; ++j) {
        while (n < n_max) {
            const double level = (2.0 * static_cast<double>(n) + 1.0) * kPi;
            if (level <= psi[j]) {
                ++n;
                continue;
            }
            if (level > psi[j + 1]) break;
            double a = grid[j], fa = psi[j] - level;
            double b = grid[j + 1], fb = psi[j + 1] - level;
            for (int iter = 0; iter < 40 && b - a > 1e-4; ++iter) {
                double x = fb != fa ? a - fa * (b - a) / (fb - fa) : 0.5 * (a + b);
                if (!(x > a && x < b)) x = 0.5 * (a + b);
                const double fx = eval_single(x) - level;
                if (fx < 0.0) {
                    a = x;
                    fa = fx;
                } else {
                    b = x;
                    fb = fx;
                }
            }
            atoms.push_back(0.5 * (a + b));
            ++n;
        }
    }
    return atoms;
}

}  // namespace betaspectra
