#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rowsolve/csvio.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"
#include "rowsolve/problem.hpp"
#include "rowsolve/samplers.hpp"

using namespace rowsolve;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("rowsolve_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("random_orthonormal is orthonormal") {
    Rng rng(1);
    DenseMatrix q = random_orthonormal(6, rng);
    DenseMatrix qtq = matmul_tn(q, q);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(std::fabs(qtq(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("gen_gaussian consistent case: every row satisfies b = 2a") {
    GaussianProblem p = gen_gaussian(1, DenseVector{1.0}, DenseVector{2.0}, 0.0, 3);
    Rng rng(5);
    BlockSample s = sample_gaussian_block(p, 64, rng);
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(s.b_block[i] == doctest::Approx(2.0 * s.a_block(i, 0)).epsilon(1e-12));
}

TEST_CASE("gen_gaussian plants the exact solution and residual norm") {
    Rng prng(12);
    DenseVector planted(4);
    for (std::size_t i = 0; i < 4; ++i) planted[i] = prng.next_gaussian();
    GaussianProblem p = gen_gaussian(4, DenseVector{2.0, 1.5, 1.0, 0.5}, planted, 0.3, 7);
    // underlying residual = l_b - L_a^T x* must be (0,...,0, noise_std)
    const std::size_t n = 4;
    for (std::size_t j = 0; j < n; ++j) {
        double laj = 0.0;
        for (std::size_t i = 0; i < n; ++i) laj += p.l_factor(i, j) * planted[i];
        CHECK(std::fabs(p.l_factor(n, j) - laj) < 1e-12);
    }
    CHECK(p.l_factor(n, n) == doctest::Approx(0.3));
    // L_n carries the requested spectrum
    DenseVector sig = singular_values(p.l_n());
    CHECK(sig[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(sig[3] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("gen_gaussian batch OLS over 1e5 rows recovers the planted solution") {
    DenseVector planted{1.0, -1.0};
    GaussianProblem p = gen_gaussian(2, DenseVector{1.0, 1.0}, planted, 0.1, 11);
    Rng rng(13);
    const std::size_t big = 100000;
    BlockSample s = sample_gaussian_block(p, big, rng);
    DenseVector est = qr_lstsq(s.a_block, s.b_block);
    // oracle: cov(est) ~ noise^2 (A^T A)^{-1}
    DenseMatrix g = matmul_tn(s.a_block, s.a_block);
    for (std::size_t i = 0; i < 2; ++i) {
        DenseVector e(2, 0.0);
        e[i] = 1.0;
        DenseVector col = cholesky_solve_spd(g, e);
        const double se = 0.1 * std::sqrt(col[i]);
        CHECK(std::fabs(est[i] - planted[i]) <= 3.0 * se);
    }
}

TEST_CASE("gen_gaussian polynomial decay Demmel condition number identity") {
    const std::size_t n = 12;
    DenseVector spectrum(n);
    for (std::size_t i = 0; i < n; ++i)
        spectrum[i] = std::pow(static_cast<double>(i + 1), -2.0);  // sigma_i^2 = i^-4
    Rng prng(2);
    DenseVector planted(n);
    for (std::size_t i = 0; i < n; ++i) planted[i] = prng.next_gaussian();
    GaussianProblem p = gen_gaussian(n, spectrum, planted, 0.0, 21);
    DenseVector sig = singular_values(p.l_n());
    double kappa_dem_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) kappa_dem_sq += sig[i] * sig[i];
    kappa_dem_sq /= sig[n - 1] * sig[n - 1];
    double direct = 0.0;  // sum i^-4 / n^-4
    for (std::size_t i = 1; i <= n; ++i) direct += std::pow(static_cast<double>(i), -4.0);
    direct /= std::pow(static_cast<double>(n), -4.0);
    CHECK(kappa_dem_sq == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("sample_gaussian_block shapes and streaming indices") {
    GaussianProblem p = gen_gaussian(2, DenseVector{1.0, 0.5}, DenseVector{0.0, 0.0}, 0.1, 1);
    Rng rng(3);
    BlockSample s = sample_gaussian_block(p, 3, rng);
    CHECK(s.a_block.rows() == 3);
    CHECK(s.a_block.cols() == 2);
    CHECK(s.b_block.size() == 3);
    CHECK(!s.indices.has_value());
}

TEST_CASE("sample_gaussian_block empirical covariance matches L L^T") {
    const std::size_t n = 3;
    Rng prng(8);
    DenseVector planted(n);
    for (std::size_t i = 0; i < n; ++i) planted[i] = prng.next_gaussian();
    GaussianProblem p = gen_gaussian(n, DenseVector{1.5, 1.0, 0.5}, planted, 0.2, 17);
    DenseMatrix q_true = matmul(p.l_factor, transpose(p.l_factor));

    Rng rng(19);
    const std::size_t draws = 100000;
    BlockSample s = sample_gaussian_block(p, draws, rng);
    // extend rows with b to estimate the full (n+1) covariance
    DenseMatrix rows(draws, n + 1);
    for (std::size_t i = 0; i < draws; ++i) {
        for (std::size_t j = 0; j < n; ++j) rows(i, j) = s.a_block(i, j);
        rows(i, n) = s.b_block[i];
    }
    DenseMatrix q_emp = matmul_tn(rows, rows);
    for (std::size_t i = 0; i < q_emp.size(); ++i)
        q_emp.data()[i] /= static_cast<double>(draws);
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= n; ++j) {
            // var of a product of joint Gaussians: Q_ii Q_jj + Q_ij^2
            const double se = std::sqrt(
                (q_true(i, i) * q_true(j, j) + q_true(i, j) * q_true(i, j)) /
                static_cast<double>(draws));
            CHECK(std::fabs(q_emp(i, j) - q_true(i, j)) <= 5.0 * se);
        }
}

TEST_CASE("gen_chebyshev n=1 identity column is the grid") {
    ChebyshevSpec spec;
    spec.n = 1;
    spec.m = 9;
    spec.noise_std = 0.0;
    spec.seed = 4;
    LeastSquaresProblem p = gen_chebyshev(spec);
    for (std::size_t i = 0; i < 9; ++i) {
        const double v = -1.0 + 2.0 * static_cast<double>(i) / 8.0;
        CHECK(p.a(i, 0) == doctest::Approx(v).epsilon(1e-15));
    }
}

TEST_CASE("gen_chebyshev consistent system solves exactly") {
    ChebyshevSpec spec;
    spec.n = 4;
    spec.m = 64;
    spec.noise_std = 0.0;
    spec.seed = 9;
    LeastSquaresProblem p = gen_chebyshev(spec);
    REQUIRE(p.x_star.has_value());
    CHECK(*p.residual_norm < 1e-8);
    CHECK(nrm2(residual(p.a, *p.x_star, p.b)) < 1e-8);
}

TEST_CASE("gen_chebyshev fast decay is ill-conditioned but finite") {
    ChebyshevSpec spec;
    spec.n = 50;
    spec.m = 2000;
    spec.c_kind = ChebyshevSpec::CKind::DecayingSpectrum;
    spec.exponent = 1.0;
    spec.noise_std = 1e-2;
    spec.seed = 7;
    LeastSquaresProblem p = gen_chebyshev(spec);
    DenseVector sig = singular_values(p.a);
    const double smin = min_nonzero_singular_value(p.a, default_rank_tol(2000, 50));
    REQUIRE(smin > 0.0);
    const double kappa = sig[0] / smin;
    CHECK(std::isfinite(kappa));
    CHECK(kappa > 10.0);
}

TEST_CASE("gen_chebyshev is deterministic across runs") {
    ChebyshevSpec spec;
    spec.n = 6;
    spec.m = 40;
    spec.c_kind = ChebyshevSpec::CKind::DecayingSpectrum;
    spec.exponent = 1.0;
    spec.noise_std = 1e-2;
    spec.seed = 77;
    LeastSquaresProblem p1 = gen_chebyshev(spec);
    LeastSquaresProblem p2 = gen_chebyshev(spec);
    CHECK(p1.a == p2.a);
    CHECK(p1.b == p2.b);
    fs::path d1 = temp_dir("cheb1"), d2 = temp_dir("cheb2");
    save_problem(p1, d1);
    save_problem(p2, d2);
    CHECK(slurp(d1 / "A.csv") == slurp(d2 / "A.csv"));
    CHECK(slurp(d1 / "b.csv") == slurp(d2 / "b.csv"));
    CHECK(slurp(d1 / "meta.json") == slurp(d2 / "meta.json"));
}

TEST_CASE("gen_isosceles epsilon = 1") {
    LeastSquaresProblem p = gen_isosceles(1.0);
    CHECK(p.a == DenseMatrix::from_rows({{0.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}}));
    CHECK(p.b == DenseVector{0.0, 2.0, 0.0});
    REQUIRE(p.x_star.has_value());
    CHECK((*p.x_star)[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((*p.x_star)[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("gen_isosceles x* approaches (1, 0) as epsilon -> 0") {
    LeastSquaresProblem p = gen_isosceles(1e-3);
    CHECK((*p.x_star)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs((*p.x_star)[1]) < 1e-8);
}

TEST_CASE("gen_isosceles residual norm matches direct evaluation") {
    LeastSquaresProblem p = gen_isosceles(0.1);
    const double direct = nrm2(residual(p.a, *p.x_star, p.b));
    CHECK(*p.residual_norm == doctest::Approx(direct).epsilon(1e-12));
    p.validate();  // normal equations must hold
}

TEST_CASE("gen_isosceles pairwise intersections are the triangle vertices") {
    for (double eps : {0.5, 0.1, 0.02}) {
        LeastSquaresProblem p = gen_isosceles(eps);
        auto solve2 = [&](std::size_t r1, std::size_t r2) {
            // Cramer on the 2x2 subsystem
            const double a = p.a(r1, 0), b = p.a(r1, 1), c = p.a(r2, 0), d = p.a(r2, 1);
            const double det = a * d - b * c;
            REQUIRE(det != 0.0);
            return DenseVector{(p.b[r1] * d - b * p.b[r2]) / det,
                               (a * p.b[r2] - p.b[r1] * c) / det};
        };
        DenseVector v12 = solve2(0, 1), v13 = solve2(0, 2), v23 = solve2(1, 2);
        CHECK(v12[0] == doctest::Approx(1.0 + eps).epsilon(1e-12));
        CHECK(std::fabs(v12[1]) < 1e-12);
        CHECK(v13[0] == doctest::Approx(1.0 - eps).epsilon(1e-12));
        CHECK(std::fabs(v13[1]) < 1e-12);
        CHECK(v23[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v23[1] == doctest::Approx(1.0 / eps).epsilon(1e-12));
    }
}

TEST_CASE("gen_noisy with zero noise recovers the planted solution") {
    Rng rng(33);
    DenseMatrix a(20, 4);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.next_gaussian();
    DenseVector planted{1.0, -2.0, 0.5, 0.25};
    LeastSquaresProblem p = gen_noisy(a, planted, 0.0, 5);
    CHECK(nrm2_diff(*p.x_star, planted) < 1e-9);
}

TEST_CASE("gen_noisy with a zero column yields a zero coordinate") {
    Rng rng(35);
    DenseMatrix a(10, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        a(i, 0) = rng.next_gaussian();
        a(i, 1) = 0.0;
        a(i, 2) = rng.next_gaussian();
    }
    LeastSquaresProblem p = gen_noisy(a, DenseVector{1.0, 5.0, -1.0}, 1e-3, 6);
    CHECK(std::fabs((*p.x_star)[1]) < 1e-10);
}

TEST_CASE("gen_noisy perturbation magnitude matches the OLS bound") {
    // over 50 seeds, mean ||x_star - planted|| should be on the order of
    // noise_std * ||A^+||_F (the exact expectation for Gaussian noise)
    Rng arng(40);
    DenseMatrix a(1000, 10);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = arng.next_gaussian();
    DenseVector planted(10);
    for (std::size_t i = 0; i < 10; ++i) planted[i] = arng.next_gaussian();
    DenseVector sig = singular_values(a);
    double pinv_fro_sq = 0.0;
    for (std::size_t i = 0; i < 10; ++i) pinv_fro_sq += 1.0 / (sig[i] * sig[i]);
    const double expected = 1e-2 * std::sqrt(pinv_fro_sq);

    double mean_err = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        LeastSquaresProblem p = gen_noisy(a, planted, 1e-2, seed);
        mean_err += nrm2_diff(*p.x_star, planted);
    }
    mean_err /= 50.0;
    CHECK(mean_err > expected / 10.0);
    CHECK(mean_err < expected * 10.0);
}

TEST_CASE("save/load round trip is bit-exact") {
    LeastSquaresProblem p = gen_isosceles(0.5);
    fs::path dir = temp_dir("roundtrip");
    save_problem(p, dir);
    LeastSquaresProblem q = load_problem(dir);
    CHECK(p.a == q.a);
    CHECK(p.b == q.b);
    CHECK(*p.x_star == *q.x_star);
    CHECK(*p.residual_norm == *q.residual_norm);
    CHECK(q.meta.at("family") == "isosceles");
}

TEST_CASE("load_problem errors name the missing file") {
    LeastSquaresProblem p = gen_isosceles(0.5);
    fs::path dir = temp_dir("missing_b");
    save_problem(p, dir);
    fs::remove(dir / "b.csv");
    try {
        load_problem(dir);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("b.csv") != std::string::npos);
    }
}

TEST_CASE("meta.json preserves seed and family strings") {
    Rng rng(50);
    DenseMatrix a(6, 2);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.next_gaussian();
    LeastSquaresProblem p = gen_noisy(a, DenseVector{1.0, 2.0}, 0.01, 12345);
    fs::path dir = temp_dir("meta");
    save_problem(p, dir);
    LeastSquaresProblem q = load_problem(dir);
    CHECK(q.meta.at("seed") == "12345");
    CHECK(q.meta.at("family") == "noisy");
}

TEST_CASE("gaussian bundle round trip") {
    GaussianProblem p = gen_gaussian(3, DenseVector{1.0, 0.8, 0.5},
                                     DenseVector{1.0, 0.0, -1.0}, 0.05, 9);
    fs::path dir = temp_dir("gauss_bundle");
    save_problem(p, dir);
    ProblemBundle b = load_bundle(dir);
    REQUIRE(b.is_gaussian());
    CHECK(b.gaussian->l_factor == p.l_factor);
    CHECK(b.gaussian->x_star == p.x_star);
    CHECK(b.gaussian->noise_std == p.noise_std);
}

TEST_CASE("validate rejects an inconsistent x_star") {
    LeastSquaresProblem p = gen_isosceles(0.5);
    (*p.x_star)[0] += 0.5;
    CHECK_THROWS_AS(p.validate(), ContractError);
}

TEST_CASE("generator parameter errors") {
    CHECK_THROWS_AS(gen_isosceles(0.0), ContractError);
    CHECK_THROWS_AS(gen_isosceles(1.5), ContractError);
    CHECK_THROWS_AS(
        gen_gaussian(2, DenseVector{1.0, -1.0}, DenseVector{0.0, 0.0}, 0.1, 0),
        ContractError);
    ChebyshevSpec bad;
    bad.n = 10;
    bad.m = 5;
    CHECK_THROWS_AS(gen_chebyshev(bad), ContractError);
}
