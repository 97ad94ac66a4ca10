#pragma once

#include <cstddef>

#include "rowsolve/types.hpp"

// Data-parallel kernels shared by every module. Each kernel has a plain
// serial implementation in rowsolve::serial (the reference used by the
// tests and the kernel benchmark) and an OpenMP version in rowsolve::
// that parallelizes over independent output elements only, so results are
// bit-identical to the serial code for any thread count.

namespace rowsolve {

namespace serial {

double dot(const double* a, const double* b, std::size_t n);

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// y = M x
void matvec(const DenseMatrix& m, const DenseVector& x, DenseVector& y);

/// y = M^T x
void matvec_t(const DenseMatrix& m, const DenseVector& x, DenseVector& y);

/// G = M M^T (k x k symmetric)
void gram_aat(const DenseMatrix& m, DenseMatrix& g);

}  // namespace serial

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

void matvec(const DenseMatrix& m, const DenseVector& x, DenseVector& y);
void matvec_t(const DenseMatrix& m, const DenseVector& x, DenseVector& y);
void gram_aat(const DenseMatrix& m, DenseMatrix& g);

DenseVector matvec(const DenseMatrix& m, const DenseVector& x);
DenseVector matvec_t(const DenseMatrix& m, const DenseVector& x);
DenseMatrix gram_aat(const DenseMatrix& m);

/// C = A B
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// C = A^T B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& m);

double nrm2(const DenseVector& v);
double nrm2_diff(const DenseVector& a, const DenseVector& b);
double dot(const DenseVector& a, const DenseVector& b);

double frobenius_norm(const DenseMatrix& m);
double max_abs(const DenseMatrix& m);

/// b - M x, the block residual used by every solver update.
DenseVector residual(const DenseMatrix& m, const DenseVector& x, const DenseVector& b);

/// Compensated (Kahan) accumulator; keeps long probability-weighted sums
/// stable to ~1 ulp so enumeration results match across chunkings to 1e-12.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace rowsolve
