#include "rowsolve/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rowsolve/kernels.hpp"

namespace rowsolve {

double default_rank_tol(std::size_t rows, std::size_t cols) {
    return 1e-12 * static_cast<double>(std::max(rows, cols));
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

namespace {

void check_symmetric(const DenseMatrix& g) {
    require(g.rows() == g.cols(), "cholesky: matrix not square");
    double scale = max_abs(g);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = i + 1; j < g.cols(); ++j)
            if (std::fabs(g(i, j) - g(j, i)) > 1e-12 * std::max(1.0, scale))
                throw ContractError("cholesky: matrix not symmetric");
}

}  // namespace

DenseMatrix cholesky_factor(const DenseMatrix& g) {
    check_symmetric(g);
    const std::size_t n = g.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = g(j, j) - serial::dot(l.row(j), l.row(j), j);
        if (!(d > 0.0))
            throw NotPositiveDefinite("cholesky: non-positive pivot at column " +
                                      std::to_string(j));
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = g(i, j) - serial::dot(l.row(i), l.row(j), j);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

double cholesky_logdet(const DenseMatrix& g) {
    DenseMatrix l = cholesky_factor(g);
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

void forward_subst(const DenseMatrix& l, DenseVector& x) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i] - serial::dot(l.row(i), x.data(), i);
        x[i] = s / l(i, i);
    }
}

void backward_subst_lt(const DenseMatrix& l, DenseVector& x) {
    const std::size_t n = l.rows();
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
        x[ii] = s / l(ii, ii);
    }
}

DenseVector cholesky_solve_spd(const DenseMatrix& g, const DenseVector& y) {
    require(y.size() == g.rows(), "cholesky_solve_spd: dimension mismatch");
    DenseMatrix l = cholesky_factor(g);
    DenseVector x = y;
    forward_subst(l, x);
    backward_subst_lt(l, x);
    return x;
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD
// ---------------------------------------------------------------------------

namespace {

// Work representation: n columns of length m, contiguous per column.
struct ColMat {
    std::size_t m = 0, n = 0;
    std::vector<double> d;
    ColMat(std::size_t m_, std::size_t n_) : m(m_), n(n_), d(m_ * n_, 0.0) {}
    double* col(std::size_t j) { return d.data() + j * m; }
    const double* col(std::size_t j) const { return d.data() + j * m; }
};

// One-sided Jacobi on B (m x n, m >= n): orthogonalizes the columns of B by
// plane rotations accumulated into V (V may have zero rows to skip
// accumulation). On return the columns of B are sigma_j * u_j.
void jacobi_orthogonalize(ColMat& b, ColMat& v) {
    const std::size_t n = b.n, m = b.m;
    if (n < 2) return;
    const double tol = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* bp = b.col(p);
                double* bq = b.col(q);
                const double app = serial::dot(bp, bp, m);
                const double aqq = serial::dot(bq, bq, m);
                const double apq = serial::dot(bp, bq, m);
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bi = bp[i], bj = bq[i];
                    bp[i] = cs * bi - sn * bj;
                    bq[i] = sn * bi + cs * bj;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (std::size_t i = 0; i < v.m; ++i) {
                    const double vi = vp[i], vj = vq[i];
                    vp[i] = cs * vi - sn * vj;
                    vq[i] = sn * vi + cs * vj;
                }
            }
        }
        if (!rotated) return;
    }
    throw NumericError("svd: Jacobi sweeps did not converge");
}

// Extends the first r orthonormal columns of u (m x m) to a full basis.
void complete_orthonormal(ColMat& u, std::size_t r) {
    const std::size_t m = u.m;
    std::size_t filled = r;
    for (std::size_t cand = 0; cand < m && filled < m; ++cand) {
        double* target = u.col(filled);
        std::fill(target, target + m, 0.0);
        target[cand] = 1.0;
        // two rounds of modified Gram-Schmidt for stability
        for (int round = 0; round < 2; ++round)
            for (std::size_t j = 0; j < filled; ++j) {
                const double proj = serial::dot(u.col(j), target, m);
                serial::axpy(-proj, u.col(j), target, m);
            }
        const double nrm = std::sqrt(serial::dot(target, target, m));
        if (nrm > 0.5) {
            for (std::size_t i = 0; i < m; ++i) target[i] /= nrm;
            ++filled;
        }
    }
    if (filled < m) throw NumericError("svd: failed to complete orthonormal basis");
}

SvdResult svd_tall(const DenseMatrix& mat) {
    const std::size_t m = mat.rows(), n = mat.cols();
    ColMat b(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) b.col(j)[i] = mat(i, j);
    ColMat v(n, n);
    for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

    jacobi_orthogonalize(b, v);

    std::vector<double> sig(n);
    for (std::size_t j = 0; j < n; ++j) sig[j] = std::sqrt(serial::dot(b.col(j), b.col(j), m));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return sig[a] > sig[c]; });

    const double smax = n ? sig[order[0]] : 0.0;
    const double utol = smax * 1e-14;

    SvdResult res;
    res.singular_values.resize(n);
    res.vt = DenseMatrix(n, n);
    ColMat u(m, m);
    std::size_t kept = 0;
    for (std::size_t jj = 0; jj < n; ++jj) {
        const std::size_t j = order[jj];
        res.singular_values[jj] = sig[j];
        for (std::size_t i = 0; i < n; ++i) res.vt(jj, i) = v.col(j)[i];
        if (sig[j] > utol && sig[j] > 0.0) {
            double* uc = u.col(kept);
            for (std::size_t i = 0; i < m; ++i) uc[i] = b.col(j)[i] / sig[j];
            ++kept;
        }
    }
    complete_orthonormal(u, kept);
    res.u = DenseMatrix(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) res.u(i, j) = u.col(j)[i];
    return res;
}

}  // namespace

SvdResult svd(const DenseMatrix& m) {
    require(!m.empty(), "svd: empty matrix");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(transpose(m));
    SvdResult res;
    res.singular_values = t.singular_values;
    res.u = transpose(t.vt);
    res.vt = transpose(t.u);
    return res;
}

DenseVector singular_values(const DenseMatrix& mat) {
    require(!mat.empty(), "singular_values: empty matrix");
    const bool tall = mat.rows() >= mat.cols();
    const DenseMatrix& src = mat;
    const std::size_t m = tall ? mat.rows() : mat.cols();
    const std::size_t n = tall ? mat.cols() : mat.rows();
    ColMat b(m, n);
    for (std::size_t i = 0; i < mat.rows(); ++i)
        for (std::size_t j = 0; j < mat.cols(); ++j) {
            if (tall)
                b.col(j)[i] = src(i, j);
            else
                b.col(i)[j] = src(i, j);
        }
    ColMat v(0, n);  // zero rows: skip accumulation
    jacobi_orthogonalize(b, v);
    DenseVector sig(n);
    for (std::size_t j = 0; j < n; ++j) sig[j] = std::sqrt(serial::dot(b.col(j), b.col(j), m));
    std::sort(sig.raw().begin(), sig.raw().end(), std::greater<double>());
    return sig;
}

std::size_t numerical_rank(const DenseVector& sigma, double rank_tol) {
    if (sigma.size() == 0) return 0;
    const double thresh = rank_tol * sigma[0];
    std::size_t r = 0;
    for (std::size_t i = 0; i < sigma.size(); ++i)
        if (sigma[i] > thresh) ++r;
    return r;
}

DenseVector pseudoinverse_apply(const DenseMatrix& m, const DenseVector& y, double rank_tol) {
    require(rank_tol >= 0.0, "pseudoinverse_apply: rank_tol must be >= 0");
    require(y.size() == m.rows(), "pseudoinverse_apply: dimension mismatch");
    SvdResult s = svd(m);
    const double smax = s.singular_values.size() ? s.singular_values[0] : 0.0;
    const double thresh = rank_tol * smax;
    DenseVector x(m.cols(), 0.0);
    const std::size_t nv = std::min(m.rows(), m.cols());
    for (std::size_t j = 0; j < nv; ++j) {
        const double sj = s.singular_values[j];
        if (sj <= thresh || sj == 0.0) continue;
        double c = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) c += s.u(i, j) * y[i];
        c /= sj;
        for (std::size_t i = 0; i < m.cols(); ++i) x[i] += c * s.vt(j, i);
    }
    return x;
}

double min_nonzero_singular_value(const DenseMatrix& m, double rank_tol) {
    require(rank_tol > 0.0 && rank_tol < 1.0, "min_nonzero_singular_value: rank_tol in (0,1)");
    DenseVector sig = singular_values(m);
    const double smax = sig.size() ? sig[0] : 0.0;
    double smin = 0.0;
    for (std::size_t i = 0; i < sig.size(); ++i)
        if (sig[i] > rank_tol * smax && sig[i] > 0.0) smin = sig[i];
    return smin;
}

// ---------------------------------------------------------------------------
// Householder least squares
// ---------------------------------------------------------------------------

namespace {

// Builds a Householder reflector H = I - tau v v^T (v[0] = 1 implicit) that
// maps x to ||x|| e_1; returns tau and writes the resulting pivot to *head.
// v[1..] overwrites x[1..]. Stable v_1 computation avoids cancellation.
double make_householder(double* x, std::size_t len, double* head) {
    double sigma = 0.0;
    for (std::size_t i = 1; i < len; ++i) sigma += x[i] * x[i];
    const double alpha = x[0];
    if (sigma == 0.0) {
        *head = alpha;
        return 0.0;
    }
    const double mu = std::sqrt(alpha * alpha + sigma);
    const double v1 = (alpha <= 0.0) ? alpha - mu : -sigma / (alpha + mu);
    const double tau = 2.0 * v1 * v1 / (sigma + v1 * v1);
    for (std::size_t i = 1; i < len; ++i) x[i] /= v1;
    *head = mu;
    return tau;
}

// Wide/square path: LQ factorization of M (k <= n). Row i of the work matrix
// stores the reflector tail after elimination; diag holds L's diagonal and
// the strictly lower part of L sits in the eliminated columns.
struct LqFactors {
    DenseMatrix w;  // k x n, reflectors + L
    std::vector<double> tau;
    bool rank_deficient = false;
};

LqFactors lq_factor(const DenseMatrix& m) {
    const std::size_t k = m.rows(), n = m.cols();
    LqFactors f;
    f.w = m;
    f.tau.assign(k, 0.0);
    double diag_max = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double* ri = f.w.row(i) + i;
        const std::size_t len = n - i;
        double head = 0.0;
        f.tau[i] = make_householder(ri, len, &head);
        f.w(i, i) = head;
        diag_max = std::max(diag_max, std::fabs(head));
        if (f.tau[i] != 0.0) {
            const std::ptrdiff_t kk = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if ((k - i) * len >= (1u << 16))
            for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + 1; j < kk; ++j) {
                double* rj = f.w.row(j) + i;
                double d = rj[0];
                for (std::size_t l = 1; l < len; ++l) d += rj[l] * ri[l];
                d *= f.tau[i];
                rj[0] -= d;
                for (std::size_t l = 1; l < len; ++l) rj[l] -= d * ri[l];
            }
        }
    }
    const double tol = default_rank_tol(k, n) * diag_max;
    for (std::size_t i = 0; i < k; ++i)
        if (std::fabs(f.w(i, i)) <= tol) f.rank_deficient = true;
    return f;
}

DenseVector lq_min_norm_solve(const LqFactors& f, const DenseVector& y) {
    const std::size_t k = f.w.rows(), n = f.w.cols();
    // forward solve L t = y using the lower triangle of w
    DenseVector t = y;
    for (std::size_t i = 0; i < k; ++i) {
        double s = t[i];
        for (std::size_t j = 0; j < i; ++j) s -= f.w(i, j) * t[j];
        t[i] = s / f.w(i, i);
    }
    // x = Q^T [t; 0] = H_1 ... H_k [t; 0]
    DenseVector x(n, 0.0);
    for (std::size_t i = 0; i < k; ++i) x[i] = t[i];
    for (std::size_t ii = k; ii-- > 0;) {
        if (f.tau[ii] == 0.0) continue;
        const double* v = f.w.row(ii) + ii;
        const std::size_t len = n - ii;
        double d = x[ii];
        for (std::size_t l = 1; l < len; ++l) d += x[ii + l] * v[l];
        d *= f.tau[ii];
        x[ii] -= d;
        for (std::size_t l = 1; l < len; ++l) x[ii + l] -= d * v[l];
    }
    return x;
}

// Tall path: Householder QR of M (k > n) working on strided columns.
struct QrFactors {
    DenseMatrix w;  // k x n, reflectors below the diagonal, R on and above
    std::vector<double> tau;
    bool rank_deficient = false;
};

QrFactors qr_factor(const DenseMatrix& m) {
    const std::size_t k = m.rows(), n = m.cols();
    QrFactors f;
    f.w = m;
    f.tau.assign(n, 0.0);
    std::vector<double> col(k);
    double diag_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t len = k - j;
        for (std::size_t i = 0; i < len; ++i) col[i] = f.w(j + i, j);
        double head = 0.0;
        f.tau[j] = make_householder(col.data(), len, &head);
        diag_max = std::max(diag_max, std::fabs(head));
        f.w(j, j) = head;
        for (std::size_t i = 1; i < len; ++i) f.w(j + i, j) = col[i];
        if (f.tau[j] == 0.0) continue;
        for (std::size_t c = j + 1; c < n; ++c) {
            double d = f.w(j, c);
            for (std::size_t i = 1; i < len; ++i) d += f.w(j + i, c) * col[i];
            d *= f.tau[j];
            f.w(j, c) -= d;
            for (std::size_t i = 1; i < len; ++i) f.w(j + i, c) -= d * col[i];
        }
    }
    const double tol = default_rank_tol(k, n) * diag_max;
    for (std::size_t j = 0; j < n; ++j)
        if (std::fabs(f.w(j, j)) <= tol) f.rank_deficient = true;
    return f;
}

DenseVector qr_solve(const QrFactors& f, const DenseVector& y) {
    const std::size_t k = f.w.rows(), n = f.w.cols();
    DenseVector z = y;
    for (std::size_t j = 0; j < n; ++j) {
        if (f.tau[j] == 0.0) continue;
        const std::size_t len = k - j;
        double d = z[j];
        for (std::size_t i = 1; i < len; ++i) d += f.w(j + i, j) * z[j + i];
        d *= f.tau[j];
        z[j] -= d;
        for (std::size_t i = 1; i < len; ++i) z[j + i] -= d * f.w(j + i, j);
    }
    DenseVector x(n, 0.0);
    for (std::size_t jj = n; jj-- > 0;) {
        double s = z[jj];
        for (std::size_t c = jj + 1; c < n; ++c) s -= f.w(jj, c) * x[c];
        x[jj] = s / f.w(jj, jj);
    }
    return x;
}

}  // namespace

DenseVector qr_lstsq(const DenseMatrix& m, const DenseVector& y) {
    require(!m.empty(), "qr_lstsq: empty matrix");
    require(y.size() == m.rows(), "qr_lstsq: dimension mismatch");
    if (m.rows() <= m.cols()) {
        LqFactors f = lq_factor(m);
        if (!f.rank_deficient) return lq_min_norm_solve(f, y);
    } else {
        QrFactors f = qr_factor(m);
        if (!f.rank_deficient) return qr_solve(f, y);
    }
    return pseudoinverse_apply(m, y, default_rank_tol(m.rows(), m.cols()));
}

// ---------------------------------------------------------------------------
// Symmetric Jacobi eigensolver
// ---------------------------------------------------------------------------

SymEig eigh(const DenseMatrix& s) {
    require(s.rows() == s.cols() && !s.empty(), "eigh: matrix not square");
    const std::size_t n = s.rows();
    DenseMatrix a = s;
    DenseMatrix v = DenseMatrix::identity(n);
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        double diag = 0.0;
        for (std::size_t p = 0; p < n; ++p) diag += a(p, p) * a(p, p);
        if (off <= 1e-30 * std::max(diag, 1e-300)) break;
        if (sweep == max_sweeps - 1) throw NumericError("eigh: Jacobi sweeps did not converge");
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                if (std::fabs(apq) <= 1e-16 * std::sqrt(std::fabs(app * aqq)) && app * aqq > 0.0)
                    continue;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = cs * aip - sn * aiq;
                    a(i, q) = sn * aip + cs * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = cs * api - sn * aqi;
                    a(q, i) = sn * api + cs * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = cs * vip - sn * viq;
                    v(i, q) = sn * vip + cs * viq;
                }
            }
    }
    SymEig e;
    e.values.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    e.vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        e.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) e.vectors(i, j) = v(i, order[j]);
    }
    return e;
}

DenseMatrix psd_sqrt(const DenseMatrix& s) {
    SymEig e = eigh(s);
    const std::size_t n = s.rows();
    DenseMatrix r(n, n);
    for (std::size_t l = 0; l < n; ++l) {
        const double lam = std::max(e.values[l], 0.0);
        const double sq = std::sqrt(lam);
        if (sq == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = sq * e.vectors(i, l);
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) r(i, j) += c * e.vectors(j, l);
        }
    }
    return r;
}

DenseMatrix psd_pinv(const DenseMatrix& s, double rank_tol) {
    SymEig e = eigh(s);
    const std::size_t n = s.rows();
    const double lmax = e.values.size() ? std::max(e.values[0], 0.0) : 0.0;
    const double thresh = rank_tol * rank_tol * lmax;
    DenseMatrix r(n, n);
    for (std::size_t l = 0; l < n; ++l) {
        const double lam = e.values[l];
        if (lam <= thresh || lam <= 0.0) continue;
        const double inv = 1.0 / lam;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = inv * e.vectors(i, l);
            for (std::size_t j = 0; j < n; ++j) r(i, j) += c * e.vectors(j, l);
        }
    }
    return r;
}

}  // namespace rowsolve
