#include "betaspectra/prufer.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace betaspectra {

namespace {

constexpr double kSnap = 1e-9;           // pi-multiple snap for counts/decomposition
constexpr double kFastAngleLimit = 0.04;  // max |2h theta'| handled by the Taylor kernel

// Small-angle sin/cos, |d| <= 0.05: series error < 1e-17, well below the
// per-step roundoff of the reference kernel.
inline void taylor_sincos(double d, double& s, double& c) {
    const double d2 = d * d;
    s = d * (1.0 - d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0)));
    c = 1.0 - 0.5 * d2 * (1.0 - d2 / 12.0 * (1.0 - d2 / 30.0 * (1.0 - d2 / 56.0)));
}

// State-of-arrays batch of Prüfer phases sharing one potential sample.
// c2/s2 track cos(2 theta), sin(2 theta) for the Taylor kernel.
struct Batch {
    std::vector<double> kappa, inv2k, theta, c2, s2, logr, max_logr;

    explicit Batch(std::span<const double> kappas) {
        const std::size_t n = kappas.size();
        kappa.assign(kappas.begin(), kappas.end());
        inv2k.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(kappas[i] > 0.0)) throw std::invalid_argument("kappa must be positive");
            inv2k[i] = 0.5 / kappas[i];
        }
        theta.assign(n, 0.0);
        c2.assign(n, 1.0);
        s2.assign(n, 0.0);
        logr.assign(n, 0.0);
        max_logr.assign(n, 0.0);
    }

    std::size_t size() const { return kappa.size(); }

    void step_fast(double q, double h) {
        const std::size_t n = kappa.size();
        double* __restrict__ th = theta.data();
        double* __restrict__ cc = c2.data();
        double* __restrict__ ss = s2.data();
        double* __restrict__ lr = logr.data();
        double* __restrict__ ml = max_logr.data();
        const double* __restrict__ kp = kappa.data();
        const double* __restrict__ ik = inv2k.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double d1 = kp[i] - q * (1.0 - cc[i]) * ik[i];
            double sh, ch;
            taylor_sincos(h * d1, sh, ch);
            const double cm = cc[i] * ch - ss[i] * sh;
            const double sm = ss[i] * ch + cc[i] * sh;
            const double d2 = kp[i] - q * (1.0 - cm) * ik[i];
            th[i] += h * d2;
            lr[i] += h * q * ik[i] * sm;
            ml[i] = std::max(ml[i], std::abs(lr[i]));
            double sf, cf;
            taylor_sincos(2.0 * h * d2, sf, cf);
            const double cn = cc[i] * cf - ss[i] * sf;
            const double sn = ss[i] * cf + cc[i] * sf;
            const double fix = 0.5 * (3.0 - (cn * cn + sn * sn));
            cc[i] = cn * fix;
            ss[i] = sn * fix;
        }
    }

    void step_reference(double q, double h) {
        const std::size_t n = kappa.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double d1 = kappa[i] - q * (1.0 - std::cos(2.0 * theta[i])) * inv2k[i];
            const double tm = theta[i] + 0.5 * h * d1;
            const double cm = std::cos(2.0 * tm);
            const double sm = std::sin(2.0 * tm);
            const double d2 = kappa[i] - q * (1.0 - cm) * inv2k[i];
            theta[i] += h * d2;
            logr[i] += h * q * inv2k[i] * sm;
            max_logr[i] = std::max(max_logr[i], std::abs(logr[i]));
        }
    }

    // Re-sync the rotation state when switching kernels.
    void sync_rotation() {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            c2[i] = std::cos(2.0 * theta[i]);
            s2[i] = std::sin(2.0 * theta[i]);
        }
    }
};

// Advance a batch through the whole sample using the Taylor kernel wherever
// the step angle bound allows it, the libm kernel elsewhere.
void run_batch(Batch& batch, const PotentialSample& sample) {
    const std::size_t n_full = sample.full_steps();
    const double h = sample.step;
    const double h_last = sample.last_step();

    double k_max = 0.0, k_min = 1e300;
    for (double k : batch.kappa) {
        k_max = std::max(k_max, k);
        k_min = std::min(k_min, k);
    }
    // |2h theta'| <= 2h (kappa + |q|/kappa); invert for the q threshold.
    const double q_fast = (kFastAngleLimit - 2.0 * h * k_max) * k_min / (2.0 * h);

    std::size_t split = n_full;  // first index handled by the fast kernel
    if (q_fast > 0.0) split = sample.fast_split_index(q_fast);

    std::size_t j = 0;
    for (; j < split && j < n_full; ++j) batch.step_reference(sample.q[j], h);
    if (j < n_full) {
        batch.sync_rotation();
        for (; j < n_full; ++j) batch.step_fast(sample.q[j], h);
    }
    if (h_last > 0.0) {
        batch.step_reference(sample.q[n_full], h_last);
    }
}

}  // namespace

PotentialSample PotentialSample::build(const DrivingPath& path, const PotentialModel& model,
                                       double horizon) {
    if (horizon <= 0.0) throw std::invalid_argument("horizon must be positive");
    if (horizon > path.duration * (1.0 + 1e-12)) {
        throw std::out_of_range("horizon exceeds path duration");
    }
    PotentialSample s;
    s.step = path.step;
    s.horizon = horizon;
    const auto n_full = static_cast<std::size_t>(std::floor(horizon / path.step * (1.0 + 1e-14)));
    s.q.resize(n_full + 1);
    for (std::size_t j = 0; j <= n_full; ++j) {
        const double t = static_cast<double>(j) * path.step;
        const std::size_t idx = std::min(j, path.positions.size() - 1);
        s.q[j] = model.envelope(t) * model.shape.value(path.positions[idx]);
        s.q_max_abs = std::max(s.q_max_abs, std::abs(s.q[j]));
    }
    s.suffix_max_.resize(s.q.size());
    double running = 0.0;
    for (std::size_t j = s.q.size(); j-- > 0;) {
        running = std::max(running, std::abs(s.q[j]));
        s.suffix_max_[j] = running;
    }
    return s;
}

std::size_t PotentialSample::full_steps() const { return q.size() - 1; }

double PotentialSample::last_step() const {
    const double h_last = horizon - static_cast<double>(full_steps()) * step;
    return h_last > 1e-12 * step ? h_last : 0.0;
}

std::size_t PotentialSample::fast_split_index(double q_threshold) const {
    // suffix_max_ is non-increasing; first index whose suffix max fits the bound.
    auto it = std::partition_point(suffix_max_.begin(), suffix_max_.end(),
                                   [q_threshold](double v) { return v > q_threshold; });
    return static_cast<std::size_t>(it - suffix_max_.begin());
}

double default_mesh_step(double kappa0) { return std::min(0.01, 0.02 / kappa0); }

PruferPath integrate_prufer(const DrivingPath& path, const PotentialModel& model, double kappa,
                            double horizon) {
    if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
    const PotentialSample sample = PotentialSample::build(path, model, horizon);

    PruferPath out;
    out.kappa = kappa;
    const std::size_t n_full = sample.full_steps();
    const double h = sample.step;
    const double h_last = sample.last_step();
    const std::size_t n_nodes = n_full + 1 + (h_last > 0.0 ? 1 : 0);
    out.mesh.resize(n_nodes);
    out.theta.resize(n_nodes);
    out.log_r.resize(n_nodes);
    out.mesh[0] = 0.0;
    out.theta[0] = 0.0;
    out.log_r[0] = 0.0;

    const double inv2k = 0.5 / kappa;
    double theta = 0.0, logr = 0.0;
    for (std::size_t j = 0; j < n_full; ++j) {
        const double q = sample.q[j];
        const double d1 = kappa - q * (1.0 - std::cos(2.0 * theta)) * inv2k;
        const double tm = theta + 0.5 * h * d1;
        const double cm = std::cos(2.0 * tm);
        const double sm = std::sin(2.0 * tm);
        const double d2 = kappa - q * (1.0 - cm) * inv2k;
        theta += h * d2;
        logr += h * q * inv2k * sm;
        out.mesh[j + 1] = static_cast<double>(j + 1) * h;
        out.theta[j + 1] = theta;
        out.log_r[j + 1] = logr;
    }
    if (h_last > 0.0) {
        const double q = sample.q[n_full];
        const double d1 = kappa - q * (1.0 - std::cos(2.0 * theta)) * inv2k;
        const double tm = theta + 0.5 * h_last * d1;
        const double cm = std::cos(2.0 * tm);
        const double sm = std::sin(2.0 * tm);
        const double d2 = kappa - q * (1.0 - cm) * inv2k;
        theta += h_last * d2;
        logr += h_last * q * inv2k * sm;
        out.mesh[n_full + 1] = horizon;
        out.theta[n_full + 1] = theta;
        out.log_r[n_full + 1] = logr;
    }
    return out;
}

PhaseResult final_phase(const PotentialSample& sample, double kappa) {
    Batch batch(std::span<const double>(&kappa, 1));
    run_batch(batch, sample);
    return PhaseResult{batch.theta[0], batch.logr[0], batch.max_logr[0]};
}

std::vector<double> boundary_phases(const PotentialSample& sample, std::span<const double> kappas) {
    Batch batch(kappas);
    run_batch(batch, sample);
    return std::move(batch.theta);
}

double boundary_phase(const DrivingPath& path, const PotentialModel& model, double kappa,
                      double length) {
    if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
    const PotentialSample sample = PotentialSample::build(path, model, length);
    return final_phase(sample, kappa).theta;
}

PhaseDecomposition decompose_phase(double theta) {
    long m = static_cast<long>(std::floor((theta + kSnap) / kPi));
    if (m < 0) m = 0;
    double phi = theta - static_cast<double>(m) * kPi;
    if (phi < 0.0) phi = 0.0;
    return PhaseDecomposition{m, phi};
}

long sturm_count_from_phase(double theta) {
    const long c = static_cast<long>(std::floor((theta - kSnap) / kPi));
    return c > 0 ? c : 0;
}

long count_eigenvalues_below(const DrivingPath& path, const PotentialModel& model, double kappa,
                             double length) {
    return sturm_count_from_phase(boundary_phase(path, model, kappa, length));
}

double choose_length(double e0, long m, double beta_phase) {
    if (e0 <= 0.0) throw std::invalid_argument("E0 must be positive");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (beta_phase < 0.0 || beta_phase >= kPi) {
        throw std::invalid_argument("beta_phase must lie in [0, pi)");
    }
    return (static_cast<double>(m) * kPi + beta_phase) / std::sqrt(e0);
}

namespace detail {

std::vector<GridCrossing> find_crossings(std::span<const double> kappas,
                                         std::span<const double> thetas, double target_lo,
                                         double target_hi, bool& nonmonotone) {
    std::vector<GridCrossing> out;
    const long n_min = static_cast<long>(std::floor((target_lo + kSnap) / kPi)) + 1;
    const long n_max = static_cast<long>(std::floor((target_hi + kSnap) / kPi));
    if (n_max < n_min) return out;

    long next = n_min;
    for (std::size_t j = 0; j + 1 < thetas.size(); ++j) {
        if (thetas[j + 1] < thetas[j] - 1e-11) {
            nonmonotone = true;
            continue;
        }
        while (next <= n_max) {
            const double target = static_cast<double>(next) * kPi;
            if (target <= thetas[j]) {
                ++next;
                continue;
            }
            if (target > thetas[j + 1]) break;
            out.push_back(GridCrossing{kappas[j], kappas[j + 1], thetas[j], thetas[j + 1], target});
            ++next;
        }
        if (next > n_max) break;
    }
    return out;
}

}  // namespace detail

namespace {

// Simultaneous Illinois refinement of crossing brackets; each round batches
// one integrator sweep over all still-open brackets.
std::vector<double> polish_brackets(const PotentialSample& sample,
                                    std::vector<detail::GridCrossing>& brackets,
                                    double kappa_tol) {
    struct State {
        double a, fa, b, fb;
        double target;
        int side = 0;
        double root = 0.0;
        bool open = true;
    };
    std::vector<State> st;
    st.reserve(brackets.size());
    for (const auto& br : brackets) {
        State s{br.kappa_lo, br.theta_lo - br.target, br.kappa_hi, br.theta_hi - br.target,
                br.target};
        s.root = 0.5 * (s.a + s.b);
        st.push_back(s);
    }

    std::vector<double> cand;
    std::vector<std::size_t> idx;
    for (int round = 0; round < 80; ++round) {
        cand.clear();
        idx.clear();
        for (std::size_t i = 0; i < st.size(); ++i) {
            auto& s = st[i];
            if (!s.open) continue;
            if (s.b - s.a <= kappa_tol) {
                const double den = s.fb - s.fa;
                s.root = den != 0.0 ? s.a - s.fa * (s.b - s.a) / den : 0.5 * (s.a + s.b);
                if (!(s.root >= s.a && s.root <= s.b)) s.root = 0.5 * (s.a + s.b);
                s.open = false;
                continue;
            }
            double x = s.fb != s.fa ? s.a - s.fa * (s.b - s.a) / (s.fb - s.fa)
                                    : 0.5 * (s.a + s.b);
            if (!(x > s.a && x < s.b)) x = 0.5 * (s.a + s.b);
            cand.push_back(x);
            idx.push_back(i);
        }
        if (cand.empty()) break;
        const std::vector<double> th = boundary_phases(sample, cand);
        for (std::size_t k = 0; k < cand.size(); ++k) {
            auto& s = st[idx[k]];
            const double fx = th[k] - s.target;
            if (fx < 0.0) {
                s.a = cand[k];
                s.fa = fx;
                if (s.side == -1) s.fb *= 0.5;
                s.side = -1;
            } else {
                s.b = cand[k];
                s.fb = fx;
                if (s.side == 1) s.fa *= 0.5;
                s.side = 1;
            }
        }
    }

    std::vector<double> roots;
    roots.reserve(st.size());
    for (auto& s : st) {
        if (s.open) {
            const double den = s.fb - s.fa;
            s.root = den != 0.0 ? s.a - s.fa * (s.b - s.a) / den : 0.5 * (s.a + s.b);
            if (!(s.root >= s.a && s.root <= s.b)) s.root = 0.5 * (s.a + s.b);
        }
        roots.push_back(s.root);
    }
    return roots;
}

}  // namespace

SpectrumWindow locate_atoms(const DrivingPath& path, const PotentialModel& model, double e0,
                            double length, double window) {
    if (e0 <= 0.0) throw std::invalid_argument("E0 must be positive");
    if (window <= 0.0) throw std::invalid_argument("window must be positive");
    const double kappa0 = std::sqrt(e0);
    if (kappa0 - window / length <= 0.0) {
        throw std::invalid_argument("window reaches kappa <= 0; shrink W or grow L");
    }

    const PotentialSample sample = PotentialSample::build(path, model, length);
    const double delta = kPi / length / 8.0;
    const long jm = static_cast<long>(std::ceil(window / (length * delta) - 1e-12));

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(2 * jm + 3));
    grid.push_back(kappa0 - window / length);  // exact edges first, then the scan grid
    grid.push_back(kappa0 + window / length);
    for (long j = -jm; j <= jm; ++j) grid.push_back(kappa0 + static_cast<double>(j) * delta);

    std::vector<double> thetas = boundary_phases(sample, grid);

    SpectrumWindow win;
    win.e0 = e0;
    win.length = length;
    win.window = window;
    win.theta_lo = thetas[0];
    win.theta_hi = thetas[1];
    const double theta_center = thetas[2 + static_cast<std::size_t>(jm)];
    const PhaseDecomposition dec = decompose_phase(theta_center);
    win.boundary_phase_m = dec.multiples;
    win.boundary_phase_phi = dec.remainder;

    std::vector<double> scan_k(grid.begin() + 2, grid.end());
    std::vector<double> scan_t(thetas.begin() + 2, thetas.end());

    bool nonmono = false;
    auto brackets = detail::find_crossings(scan_k, scan_t, win.theta_lo, win.theta_hi, nonmono);
    if (nonmono) {
        // Fallback: subdivide the scan grid 8x and redo the crossing search.
        win.nonmonotone_flag = true;
        std::vector<double> fine_k;
        fine_k.reserve(scan_k.size() * 8);
        for (std::size_t j = 0; j + 1 < scan_k.size(); ++j) {
            for (int s = 0; s < 8; ++s) {
                fine_k.push_back(scan_k[j] + (scan_k[j + 1] - scan_k[j]) * (s / 8.0));
            }
        }
        fine_k.push_back(scan_k.back());
        std::vector<double> fine_t = boundary_phases(sample, fine_k);
        bool still = false;
        brackets = detail::find_crossings(fine_k, fine_t, win.theta_lo, win.theta_hi, still);
    }

    const double kappa_tol = 1e-10 * kappa0;
    std::vector<double> roots = polish_brackets(sample, brackets, kappa_tol);
    std::sort(roots.begin(), roots.end());

    for (double k : roots) {
        const double x = length * (k - kappa0);
        if (x <= -window - 1e-9 || x > window + 1e-9) continue;
        if (!win.atoms.empty() && x - win.atoms.back() < kappa_tol * length) continue;
        win.atoms.push_back(x);
        win.kappas.push_back(k);
    }
    return win;
}

SecondOrderSample second_order_spacings(const SpectrumWindow& window, double alpha,
                                        int half_width) {
    if (half_width < 0) throw std::invalid_argument("half_width must be >= 0");
    const auto& atoms = window.atoms;
    if (atoms.size() < 2) {
        throw std::out_of_range("window has fewer than two atoms; enlarge W");
    }
    std::size_t m = 0;
    for (std::size_t i = 1; i < atoms.size(); ++i) {
        if (std::abs(atoms[i]) < std::abs(atoms[m])) m = i;
    }
    const long lo = static_cast<long>(m) - half_width;
    const long hi = static_cast<long>(m) + half_width + 1;
    if (lo < 0 || hi >= static_cast<long>(atoms.size())) {
        const double needed =
            window.window + kPi * static_cast<double>(half_width + 2);
        throw std::out_of_range("window does not cover indices m-N..m+N+1; use W >= " +
                                std::to_string(needed));
    }
    SecondOrderSample s;
    s.length = window.length;
    s.alpha = alpha;
    s.half_width = half_width;
    s.values.resize(static_cast<std::size_t>(2 * half_width + 1));
    const double scale = std::pow(window.length, alpha - 0.5);
    for (int n = -half_width; n <= half_width; ++n) {
        const auto j = static_cast<std::size_t>(static_cast<long>(m) + n);
        s.values[static_cast<std::size_t>(n + half_width)] =
            ((atoms[j + 1] - atoms[j]) - kPi) * scale;
    }
    return s;
}

}  // namespace betaspectra
