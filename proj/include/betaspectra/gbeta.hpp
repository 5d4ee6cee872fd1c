#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace betaspectra {

struct TridiagonalMatrix {
    int n = 0;
    std::vector<double> diag;     // size n
    std::vector<double> offdiag;  // size n-1, strictly positive

    double gershgorin_lo() const;
    double gershgorin_hi() const;
};

// beta-Hermite tridiagonal model for the density
//   exp(-(beta/4) sum lambda_k^2) prod_{j<k} |lambda_j - lambda_k|^beta:
// diag_i ~ N(0, 2/beta), offdiag_k ~ chi_{beta (n-k)} / sqrt(beta).
// The scaling is pinned by the n=2, beta=1 rejection oracle in the tests.
TridiagonalMatrix sample_gbeta_tridiagonal(int n, double beta, std::uint64_t seed);

// Number of eigenvalues strictly below shift (Sturm sign-change count of the
// shifted LDL^T pivots).
int sturm_count_below(const TridiagonalMatrix& t, double shift);

// All n eigenvalues by Gershgorin-bracketed Sturm bisection, each to width <= tol.
std::vector<double> tridiagonal_eigenvalues(const TridiagonalMatrix& t, double tol);

double default_eig_tol(int n);  // 1e-11 * sqrt(n)

// Bulk rescaling Lambda_k = sqrt(4n - mu^2) (lambda_k - mu), plus the halved
// atoms lambda_k/2 convention used for cross-route comparisons.
struct BulkSample {
    int n = 0;
    double mu = 0.0;
    std::vector<double> atoms;
    std::vector<double> halved;
    bool edge_warning = false;  // n^{1/6} (2 sqrt(n) - |mu|) < 5
};

BulkSample bulk_rescale(std::span<const double> eigs, int n, double mu);

}  // namespace betaspectra
