#include "rowsolve/kernels.hpp"

#include <cmath>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace rowsolve {

namespace serial {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const DenseMatrix& m, const DenseVector& x, DenseVector& y) {
    require(x.size() == m.cols(), "matvec: dimension mismatch");
    y.resize(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x.data(), m.cols());
}

void matvec_t(const DenseMatrix& m, const DenseVector& x, DenseVector& y) {
    require(x.size() == m.rows(), "matvec_t: dimension mismatch");
    y.resize(m.cols());
    y.fill(0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) axpy(x[i], m.row(i), y.data(), m.cols());
}

void gram_aat(const DenseMatrix& m, DenseMatrix& g) {
    const std::size_t k = m.rows(), n = m.cols();
    g = DenseMatrix(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
            double s = dot(m.row(i), m.row(j), n);
            g(i, j) = s;
            g(j, i) = s;
        }
}

}  // namespace serial

namespace {
// OpenMP pays off only when there is real work per thread.
constexpr std::size_t kParallelFlopCutoff = 1u << 16;
}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    return serial::dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    serial::axpy(alpha, x, y, n);
}

void matvec(const DenseMatrix& m, const DenseVector& x, DenseVector& y) {
    require(x.size() == m.cols(), "matvec: dimension mismatch");
    y.resize(m.rows());
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m.rows());
    if (m.size() < kParallelFlopCutoff) {
        for (std::ptrdiff_t i = 0; i < rows; ++i)
            y[i] = serial::dot(m.row(i), x.data(), m.cols());
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
        y[i] = serial::dot(m.row(i), x.data(), m.cols());
}

void matvec_t(const DenseMatrix& m, const DenseVector& x, DenseVector& y) {
    require(x.size() == m.rows(), "matvec_t: dimension mismatch");
    y.resize(m.cols());
    y.fill(0.0);
#if defined(_OPENMP)
    if (m.size() >= kParallelFlopCutoff && omp_get_max_threads() > 1) {
        // Each thread owns a contiguous slice of the output so the row-wise
        // accumulation order per output element matches the serial loop.
        const std::ptrdiff_t cols = static_cast<std::ptrdiff_t>(m.cols());
#pragma omp parallel
        {
            const int nt = omp_get_num_threads();
            const int tid = omp_get_thread_num();
            const std::ptrdiff_t lo = cols * tid / nt;
            const std::ptrdiff_t hi = cols * (tid + 1) / nt;
            for (std::size_t i = 0; i < m.rows(); ++i) {
                const double xi = x[i];
                const double* r = m.row(i);
                for (std::ptrdiff_t j = lo; j < hi; ++j) y[j] += xi * r[j];
            }
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < m.rows(); ++i) axpy(x[i], m.row(i), y.data(), m.cols());
}

void gram_aat(const DenseMatrix& m, DenseMatrix& g) {
    const std::size_t k = m.rows(), n = m.cols();
    g = DenseMatrix(k, k);
    if (k * k * n < kParallelFlopCutoff) {
        serial::gram_aat(m, g);
        return;
    }
    const std::ptrdiff_t kk = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < kk; ++i)
        for (std::size_t j = static_cast<std::size_t>(i); j < k; ++j) {
            double s = serial::dot(m.row(i), m.row(j), n);
            g(i, j) = s;
            g(j, i) = s;
        }
}

DenseVector matvec(const DenseMatrix& m, const DenseVector& x) {
    DenseVector y;
    matvec(m, x, y);
    return y;
}

DenseVector matvec_t(const DenseMatrix& m, const DenseVector& x) {
    DenseVector y;
    matvec_t(m, x, y);
    return y;
}

DenseMatrix gram_aat(const DenseMatrix& m) {
    DenseMatrix g;
    gram_aat(m, g);
    return g;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), "matmul: dimension mismatch");
    DenseMatrix c(a.rows(), b.cols());
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.size() * b.cols() >= kParallelFlopCutoff)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        double* ci = c.row(i);
        for (std::size_t l = 0; l < a.cols(); ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            serial::axpy(ail, b.row(l), ci, b.cols());
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows(), "matmul_tn: dimension mismatch");
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t l = 0; l < a.rows(); ++l)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double v = a(l, i);
            if (v == 0.0) continue;
            serial::axpy(v, b.row(l), c.row(i), b.cols());
        }
    return c;
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

double nrm2(const DenseVector& v) {
    return std::sqrt(serial::dot(v.data(), v.data(), v.size()));
}

double nrm2_diff(const DenseVector& a, const DenseVector& b) {
    require(a.size() == b.size(), "nrm2_diff: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double dot(const DenseVector& a, const DenseVector& b) {
    require(a.size() == b.size(), "dot: dimension mismatch");
    return serial::dot(a.data(), b.data(), a.size());
}

double frobenius_norm(const DenseMatrix& m) {
    return std::sqrt(serial::dot(m.data(), m.data(), m.size()));
}

double max_abs(const DenseMatrix& m) {
    double v = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) v = std::max(v, std::fabs(m.data()[i]));
    return v;
}

DenseVector residual(const DenseMatrix& m, const DenseVector& x, const DenseVector& b) {
    require(b.size() == m.rows(), "residual: dimension mismatch");
    DenseVector r = matvec(m, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return r;
}

}  // namespace rowsolve
