#pragma once

#include "rowsolve/types.hpp"

namespace rowsolve {

/// Full singular value decomposition M = U diag(sigma) V^T with U (m x m)
/// and V^T (n x n) orthonormal and sigma sorted non-increasing.
struct SvdResult {
    DenseMatrix u;
    DenseVector singular_values;
    DenseMatrix vt;
};

/// Symmetric eigendecomposition S = V diag(values) V^T, values descending.
struct SymEig {
    DenseVector values;
    DenseMatrix vectors;  // columns are eigenvectors
};

/// Default numerical-rank factor: singular values <= (1e-12 * max(rows,cols))
/// * sigma_max are treated as zero.
double default_rank_tol(std::size_t rows, std::size_t cols);

/// Minimal-norm x minimizing ||M x - y||. Householder QR (tall) or LQ (wide)
/// with an SVD fallback when the triangular factor is numerically singular.
DenseVector qr_lstsq(const DenseMatrix& m, const DenseVector& y);

/// Solves G x = y for symmetric positive definite G via Cholesky.
/// Throws NotPositiveDefinite on a non-positive pivot.
DenseVector cholesky_solve_spd(const DenseMatrix& g, const DenseVector& y);

/// In-place style Cholesky factor: returns lower-triangular L with G = L L^T.
DenseMatrix cholesky_factor(const DenseMatrix& g);

/// log det(G) for SPD G, via the Cholesky factor.
double cholesky_logdet(const DenseMatrix& g);

void forward_subst(const DenseMatrix& l, DenseVector& x);
void backward_subst_lt(const DenseMatrix& l, DenseVector& x);  // solves L^T x = x

/// Full SVD via one-sided Jacobi; accurate for tiny singular values.
SvdResult svd(const DenseMatrix& m);

/// Singular values only (no U/V accumulation or completion).
DenseVector singular_values(const DenseMatrix& m);

/// M^+ y with singular values <= rank_tol * sigma_max truncated.
DenseVector pseudoinverse_apply(const DenseMatrix& m, const DenseVector& y, double rank_tol);

/// Smallest singular value above rank_tol * sigma_max; 0 for a numerically
/// zero matrix.
double min_nonzero_singular_value(const DenseMatrix& m, double rank_tol);

/// Numerical rank at threshold rank_tol * sigma_max.
std::size_t numerical_rank(const DenseVector& sigma, double rank_tol);

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymEig eigh(const DenseMatrix& s);

/// Symmetric PSD square root via eigh; eigenvalues clamped at zero first.
DenseMatrix psd_sqrt(const DenseMatrix& s);

/// Pseudoinverse of a symmetric PSD matrix with relative eigenvalue cutoff
/// (rank_tol applies to singular values, i.e. sqrt of the eigenvalues).
DenseMatrix psd_pinv(const DenseMatrix& s, double rank_tol);

}  // namespace rowsolve
