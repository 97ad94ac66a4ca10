#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"
#include "rowsolve/rng.hpp"

using namespace rowsolve;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_gaussian();
    return m;
}

DenseVector random_vector(std::size_t n, Rng& rng) {
    DenseVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.next_gaussian();
    return v;
}

}  // namespace

TEST_CASE("qr_lstsq identity") {
    DenseMatrix m = DenseMatrix::identity(3);
    DenseVector x = qr_lstsq(m, DenseVector{1.0, 2.0, 3.0});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x[2] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("qr_lstsq minimal norm on rank-deficient system") {
    DenseMatrix m = DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 0.0}});
    DenseVector x = qr_lstsq(m, DenseVector{5.0, 7.0});
    CHECK(x[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(std::fabs(x[1]) < 1e-12);
}

TEST_CASE("qr_lstsq recovers a planted consistent solution") {
    Rng rng(42);
    DenseMatrix m = random_matrix(6, 3, rng);
    DenseVector planted = random_vector(3, rng);
    DenseVector y = matvec(m, planted);
    DenseVector x = qr_lstsq(m, y);
    CHECK(nrm2_diff(x, planted) < 1e-10);
}

TEST_CASE("qr_lstsq optimality against random probes") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t k = 4 + trial;
        const std::size_t n = 3 + (trial % 3);
        DenseMatrix m = random_matrix(k, n, rng);
        DenseVector y = random_vector(k, rng);
        DenseVector x = qr_lstsq(m, y);
        const double base = nrm2(residual(m, x, y));
        for (int probe = 0; probe < 100; ++probe) {
            DenseVector z = random_vector(n, rng);
            CHECK(base <= nrm2(residual(m, z, y)) + 1e-9);
        }
    }
}

TEST_CASE("qr_lstsq wide minimal-norm solution matches pseudoinverse") {
    Rng rng(11);
    DenseMatrix m = random_matrix(3, 8, rng);
    DenseVector y = random_vector(3, rng);
    DenseVector x1 = qr_lstsq(m, y);
    DenseVector x2 = pseudoinverse_apply(m, y, default_rank_tol(3, 8));
    CHECK(nrm2_diff(x1, x2) < 1e-9 * std::max(1.0, nrm2(x2)));
    // consistency: M x = y reachable since full row rank
    CHECK(nrm2(residual(m, x1, y)) < 1e-10);
}

TEST_CASE("cholesky_solve_spd scaled identity") {
    DenseMatrix g = DenseMatrix::from_rows({{2.0, 0.0}, {0.0, 2.0}});
    DenseVector x = cholesky_solve_spd(g, DenseVector{4.0, 6.0});
    CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("cholesky_solve_spd 2x2 hand inversion") {
    // [[2,1],[1,2]] (3,3) -> (1,1): inverse is (1/3)[[2,-1],[-1,2]]
    DenseMatrix g = DenseMatrix::from_rows({{2.0, 1.0}, {1.0, 2.0}});
    DenseVector x = cholesky_solve_spd(g, DenseVector{3.0, 3.0});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("cholesky_solve_spd rejects a singular matrix") {
    DenseMatrix g = DenseMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
    CHECK_THROWS_AS(cholesky_solve_spd(g, DenseVector{1.0, 1.0}), NotPositiveDefinite);
}

TEST_CASE("cholesky round trip on random SPD matrices") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + trial % 6;
        DenseMatrix b = random_matrix(n + 2, n, rng);
        DenseMatrix g = matmul_tn(b, b);
        for (std::size_t i = 0; i < n; ++i) g(i, i) += 0.1;
        DenseVector y = random_vector(n, rng);
        DenseVector x = cholesky_solve_spd(g, y);
        CHECK(nrm2_diff(matvec(g, x), y) <= 1e-10 * std::max(1.0, nrm2(y)));
    }
}

TEST_CASE("svd of diag(3,1)") {
    DenseMatrix m = DenseMatrix::from_rows({{3.0, 0.0}, {0.0, 1.0}});
    SvdResult s = svd(m);
    CHECK(s.singular_values[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(s.singular_values[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd matches brute-force Gram eigenvalues on the epsilon example") {
    const double eps = 0.1;
    const double e2 = eps * eps;
    DenseMatrix m = DenseMatrix::from_rows({{0.0, 1.0}, {1.0, e2}, {1.0, -e2}});
    // oracle: eigenvalues of the 2x2 Gram matrix M^T M = [[2, 0], [0, 1 + 2 e^4]]
    const double lam1 = 2.0;
    const double lam2 = 1.0 + 2.0 * e2 * e2;
    SvdResult s = svd(m);
    CHECK(s.singular_values[0] == doctest::Approx(std::sqrt(lam1)).epsilon(1e-10));
    CHECK(s.singular_values[1] == doctest::Approx(std::sqrt(lam2)).epsilon(1e-10));
}

TEST_CASE("svd of a rank-1 outer product has exactly one nonzero value") {
    Rng rng(5);
    DenseVector u = random_vector(6, rng), v = random_vector(4, rng);
    DenseMatrix m(6, 4);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) m(i, j) = u[i] * v[j];
    SvdResult s = svd(m);
    CHECK(s.singular_values[0] > 1e-12);
    for (std::size_t i = 1; i < 4; ++i) CHECK(s.singular_values[i] <= 1e-12);
}

TEST_CASE("svd invariants: orthogonality, reconstruction, ordering") {
    Rng rng(17);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t r = 3 + trial % 4;
        const std::size_t c = 2 + (trial * 2) % 5;
        DenseMatrix m = random_matrix(r, c, rng);
        SvdResult s = svd(m);
        // U^T U = I
        DenseMatrix utu = matmul_tn(s.u, s.u);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                CHECK(std::fabs(utu(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
        // V V^T = I  (rows of vt orthonormal)
        DenseMatrix vvt = matmul(s.vt, transpose(s.vt));
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j)
                CHECK(std::fabs(vvt(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
        // reconstruction
        DenseMatrix us(r, c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < std::min(r, c); ++j)
                us(i, j) = s.u(i, j) * s.singular_values[j];
        DenseMatrix rec = matmul(us, s.vt);
        double diff = 0.0;
        for (std::size_t i = 0; i < rec.size(); ++i)
            diff += (rec.data()[i] - m.data()[i]) * (rec.data()[i] - m.data()[i]);
        CHECK(std::sqrt(diff) <= 1e-8 * frobenius_norm(m));
        for (std::size_t i = 1; i < s.singular_values.size(); ++i)
            CHECK(s.singular_values[i] <= s.singular_values[i - 1]);
    }
}

TEST_CASE("svd of the zero matrix") {
    DenseMatrix m(3, 2, 0.0);
    SvdResult s = svd(m);
    CHECK(s.singular_values[0] == 0.0);
    CHECK(s.singular_values[1] == 0.0);
    DenseMatrix utu = matmul_tn(s.u, s.u);
    for (std::size_t i = 0; i < 3; ++i) CHECK(utu(i, i) == doctest::Approx(1.0));
}

TEST_CASE("pseudoinverse_apply identity and zero") {
    DenseMatrix eye = DenseMatrix::identity(4);
    DenseVector y{1.0, -2.0, 0.5, 3.0};
    DenseVector x = pseudoinverse_apply(eye, y, 1e-12);
    CHECK(nrm2_diff(x, y) < 1e-13);

    DenseMatrix zero(3, 2, 0.0);
    DenseVector z = pseudoinverse_apply(zero, DenseVector{1.0, 1.0, 1.0}, 1e-12);
    CHECK(nrm2(z) == 0.0);
}

TEST_CASE("pseudoinverse_apply minimal-norm solution of a single equation") {
    DenseMatrix m = DenseMatrix::from_rows({{1.0, 1.0}});
    DenseVector x = pseudoinverse_apply(m, DenseVector{2.0}, 1e-12);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pseudoinverse agrees with qr_lstsq on full-row-rank inputs") {
    Rng rng(23);
    for (int trial = 0; trial < 8; ++trial) {
        DenseMatrix m = random_matrix(3, 6, rng);
        DenseVector y = random_vector(3, rng);
        DenseVector a = qr_lstsq(m, y);
        DenseVector b = pseudoinverse_apply(m, y, default_rank_tol(3, 6));
        CHECK(nrm2_diff(a, b) <= 1e-9 * std::max(1.0, nrm2(a)));
    }
}

TEST_CASE("min_nonzero_singular_value") {
    DenseMatrix d = DenseMatrix::from_rows(
        {{3.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 0.0}});
    CHECK(min_nonzero_singular_value(d, 1e-10) == doctest::Approx(1.0).epsilon(1e-12));

    const std::size_t m = 5;
    DenseMatrix eye_over_m(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) eye_over_m(i, i) = 1.0 / static_cast<double>(m);
    CHECK(min_nonzero_singular_value(eye_over_m, 1e-10) ==
          doctest::Approx(0.2).epsilon(1e-12));

    DenseMatrix zero(4, 4, 0.0);
    CHECK(min_nonzero_singular_value(zero, 1e-10) == 0.0);
}

TEST_CASE("eigh reconstructs random symmetric matrices") {
    Rng rng(31);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 2 + trial;
        DenseMatrix b = random_matrix(n, n, rng);
        DenseMatrix s(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (b(i, j) + b(j, i));
        SymEig e = eigh(s);
        for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i] <= e.values[i - 1] + 1e-14);
        // V diag(vals) V^T = S
        DenseMatrix rec(n, n);
        for (std::size_t l = 0; l < n; ++l)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    rec(i, j) += e.values[l] * e.vectors(i, l) * e.vectors(j, l);
        for (std::size_t i = 0; i < n * n; ++i)
            CHECK(std::fabs(rec.data()[i] - s.data()[i]) < 1e-10 * std::max(1.0, max_abs(s)));
    }
}

TEST_CASE("psd_sqrt squares back") {
    Rng rng(37);
    DenseMatrix b = random_matrix(5, 3, rng);
    DenseMatrix s = matmul_tn(b, b);  // PSD, rank <= 3... here 3x3 full
    DenseMatrix r = psd_sqrt(s);
    DenseMatrix rr = matmul(r, r);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(std::fabs(rr.data()[i] - s.data()[i]) < 1e-10 * std::max(1.0, max_abs(s)));
}

TEST_CASE("qr_lstsq dimension mismatch raises a contract error") {
    DenseMatrix m = DenseMatrix::identity(3);
    CHECK_THROWS_AS(qr_lstsq(m, DenseVector{1.0, 2.0}), ContractError);
}

TEST_CASE("cholesky rejects an asymmetric matrix") {
    DenseMatrix g = DenseMatrix::from_rows({{2.0, 1.0}, {0.0, 2.0}});
    CHECK_THROWS_AS(cholesky_solve_spd(g, DenseVector{1.0, 1.0}), ContractError);
}
