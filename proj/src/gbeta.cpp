#include "betaspectra/gbeta.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "betaspectra/rng.hpp"

namespace betaspectra {

double TridiagonalMatrix::gershgorin_lo() const {
    double lo = diag[0];
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(offdiag[static_cast<std::size_t>(i) - 1]);
        if (i + 1 < n) r += std::abs(offdiag[static_cast<std::size_t>(i)]);
        lo = std::min(lo, diag[static_cast<std::size_t>(i)] - r);
    }
    return lo;
}

double TridiagonalMatrix::gershgorin_hi() const {
    double hi = diag[0];
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(offdiag[static_cast<std::size_t>(i) - 1]);
        if (i + 1 < n) r += std::abs(offdiag[static_cast<std::size_t>(i)]);
        hi = std::max(hi, diag[static_cast<std::size_t>(i)] + r);
    }
    return hi;
}

TridiagonalMatrix sample_gbeta_tridiagonal(int n, double beta, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("n must be >= 2");
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
    TridiagonalMatrix t;
    t.n = n;
    t.diag.resize(static_cast<std::size_t>(n));
    t.offdiag.resize(static_cast<std::size_t>(n) - 1);
    Rng rng(seed);
    const double diag_sigma = std::sqrt(2.0 / beta);
    const double off_scale = 1.0 / std::sqrt(beta);
    for (int i = 0; i < n; ++i) {
        t.diag[static_cast<std::size_t>(i)] = diag_sigma * rng.gaussian();
    }
    for (int k = 1; k < n; ++k) {
        t.offdiag[static_cast<std::size_t>(k) - 1] = off_scale * rng.chi(beta * (n - k));
    }
    return t;
}

int sturm_count_below(const TridiagonalMatrix& t, double shift) {
    int count = 0;
    double d = 1.0;
    for (int i = 0; i < t.n; ++i) {
        const double b2 = i > 0 ? t.offdiag[static_cast<std::size_t>(i) - 1] *
                                      t.offdiag[static_cast<std::size_t>(i) - 1]
                                : 0.0;
        d = t.diag[static_cast<std::size_t>(i)] - shift - (i > 0 ? b2 / d : 0.0);
        if (d == 0.0) d = -1e-300;
        if (d < 0.0) ++count;
    }
    return count;
}

double default_eig_tol(int n) { return 1e-11 * std::sqrt(static_cast<double>(n)); }

std::vector<double> tridiagonal_eigenvalues(const TridiagonalMatrix& t, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("tol must be positive");
    const int n = t.n;
    std::vector<double> eigs(static_cast<std::size_t>(n), 0.0);

    struct Task {
        double lo, hi;
        int klo, khi;  // counts below lo and hi
    };
    std::vector<Task> stack;
    const double pad = tol + 1e-12 * (std::abs(t.gershgorin_hi()) + std::abs(t.gershgorin_lo()));
    stack.push_back(Task{t.gershgorin_lo() - pad, t.gershgorin_hi() + pad, 0, n});

    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();
        if (task.khi <= task.klo) continue;
        if (task.hi - task.lo <= tol) {
            const double mid = 0.5 * (task.lo + task.hi);
            for (int k = task.klo; k < task.khi; ++k) eigs[static_cast<std::size_t>(k)] = mid;
            continue;
        }
        const double mid = 0.5 * (task.lo + task.hi);
        int kmid = sturm_count_below(t, mid);
        kmid = std::clamp(kmid, task.klo, task.khi);
        stack.push_back(Task{task.lo, mid, task.klo, kmid});
        stack.push_back(Task{mid, task.hi, kmid, task.khi});
    }
    return eigs;
}

BulkSample bulk_rescale(std::span<const double> eigs, int n, double mu) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    const double two_sqrt_n = 2.0 * std::sqrt(static_cast<double>(n));
    if (std::abs(mu) >= two_sqrt_n) {
        throw std::invalid_argument("|mu| must be below the spectral edge 2 sqrt(n)");
    }
    BulkSample s;
    s.n = n;
    s.mu = mu;
    s.edge_warning =
        std::pow(static_cast<double>(n), 1.0 / 6.0) * (two_sqrt_n - std::abs(mu)) < 5.0;
    const double scale = std::sqrt(4.0 * n - mu * mu);
    s.atoms.reserve(eigs.size());
    for (double e : eigs) s.atoms.push_back(scale * (e - mu));
    std::sort(s.atoms.begin(), s.atoms.end());
    s.halved.resize(s.atoms.size());
    for (std::size_t i = 0; i < s.atoms.size(); ++i) s.halved[i] = 0.5 * s.atoms[i];
    return s;
}

}  // namespace betaspectra
