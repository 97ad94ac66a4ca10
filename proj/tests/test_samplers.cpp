#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"
#include "rowsolve/problem.hpp"
#include "rowsolve/samplers.hpp"
#include "rowsolve/stats.hpp"

using namespace rowsolve;

namespace {

LeastSquaresProblem random_problem(std::size_t m, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix a(m, n);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.next_gaussian();
    DenseVector b(m);
    for (std::size_t i = 0; i < m; ++i) b[i] = rng.next_gaussian();
    LeastSquaresProblem p;
    p.a = std::move(a);
    p.b = std::move(b);
    return p;
}

std::map<std::vector<std::size_t>, std::size_t> subset_index(const SubsetLaw& law) {
    std::map<std::vector<std::size_t>, std::size_t> idx;
    for (std::size_t i = 0; i < law.subsets.size(); ++i) idx[law.subsets[i]] = i;
    return idx;
}

}  // namespace

TEST_CASE("uniform subsets of a 3-element set are equally likely") {
    Rng rng(2);
    const std::size_t draws = 100000;
    std::map<std::vector<std::size_t>, std::size_t> counts;
    for (std::size_t d = 0; d < draws; ++d) ++counts[sample_uniform_subset(3, 2, rng)];
    CHECK(counts.size() == 3);
    const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / draws);
    for (const auto& [subset, c] : counts) {
        CHECK(subset.size() == 2);
        const double f = static_cast<double>(c) / draws;
        CHECK(std::fabs(f - 1.0 / 3.0) <= 3.0 * sigma);
    }
}

TEST_CASE("uniform sampler with k = m always returns the full set") {
    Rng rng(3);
    for (int d = 0; d < 20; ++d) {
        auto s = sample_uniform_subset(5, 5, rng);
        REQUIRE(s.size() == 5);
        for (std::size_t i = 0; i < 5; ++i) CHECK(s[i] == i);
    }
}

TEST_CASE("uniform sampler chi-square over all C(12,3) subsets") {
    SubsetLaw law = uniform_law(12, 3);
    REQUIRE(law.subsets.size() == 220);
    auto idx = subset_index(law);
    Rng rng(5);
    const std::size_t draws = 1000000;
    std::vector<std::size_t> counts(law.subsets.size(), 0);
    for (std::size_t d = 0; d < draws; ++d)
        ++counts[idx.at(sample_uniform_subset(12, 3, rng))];
    CHECK(chi_square_test(counts, law.probs, draws) >= 1e-3);
}

TEST_CASE("uniform sampler row marginals are k/m") {
    Rng rng(7);
    const std::size_t m = 10, k = 3, draws = 100000;
    std::vector<std::size_t> rowcount(m, 0);
    for (std::size_t d = 0; d < draws; ++d)
        for (std::size_t i : sample_uniform_subset(m, k, rng)) ++rowcount[i];
    const double p = static_cast<double>(k) / m;
    const double sigma = std::sqrt(p * (1.0 - p) / draws);
    for (std::size_t i = 0; i < m; ++i) {
        const double f = static_cast<double>(rowcount[i]) / draws;
        CHECK(std::fabs(f - p) <= 3.0 * sigma);
    }
}

TEST_CASE("sample_uniform_subset parameter guard") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_uniform_subset(3, 4, rng), ContractError);
    CHECK_THROWS_AS(sample_uniform_subset(3, 0, rng), ContractError);
}

TEST_CASE("elem_sym on (1,2,3) with k=2") {
    ElemSymPolys e = elem_sym(DenseVector{1.0, 2.0, 3.0}, 2);
    // pairs: 1*2 + 1*3 + 2*3 = 11
    CHECK(e.values[0] == 1.0);
    CHECK(e.values[1] == 6.0);
    CHECK(e.values[2] == 11.0);
    // leave-one-out degree-1 sums: q_{-1} -> 2+3, q_{-2} -> 1+3, q_{-3} -> 1+2
    CHECK(e.leave_one_out[0] == doctest::Approx(5.0));
    CHECK(e.leave_one_out[1] == doctest::Approx(4.0));
    CHECK(e.leave_one_out[2] == doctest::Approx(3.0));
}

TEST_CASE("elem_sym of all ones gives binomial coefficients") {
    const std::size_t m = 10;
    DenseVector q(m, 1.0);
    for (std::size_t k : {0u, 1u, 3u, 5u, 10u}) {
        ElemSymPolys e = elem_sym(q, k);
        CHECK(e.values[k] == doctest::Approx(static_cast<double>(
                                 binomial_capped(m, k, 1000000))));
    }
}

TEST_CASE("elem_sym k=0") {
    ElemSymPolys e = elem_sym(DenseVector{4.0, 5.0}, 0);
    CHECK(e.values[0] == 1.0);
}

TEST_CASE("elem_sym Newton-style leave-one-out consistency") {
    Rng rng(11);
    const std::size_t m = 14, k = 4;
    DenseVector q(m);
    for (std::size_t i = 0; i < m; ++i) q[i] = std::exp(rng.next_gaussian());
    ElemSymPolys e = elem_sym(q, k);
    // p_k(q) = (1/k) sum_i q_i p_{k-1}(q_{-i})
    KahanSum acc;
    for (std::size_t i = 0; i < m; ++i) acc.add(q[i] * e.leave_one_out[i]);
    CHECK(acc.sum / static_cast<double>(k) ==
          doctest::Approx(e.values[k]).epsilon(1e-12));
}

TEST_CASE("kdpp enumerate on the 2x2 identity is symmetric") {
    LeastSquaresProblem p;
    p.a = DenseMatrix::identity(2);
    p.b = DenseVector{1.0, 1.0};
    SubsetLaw law = kdpp_probabilities_enumerate(p, 1, 1.0);
    REQUIRE(law.subsets.size() == 2);
    CHECK(law.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(law.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kdpp enumerate matches direct 2x2 determinants on the isosceles problem") {
    LeastSquaresProblem p = gen_isosceles(1.0);
    const double lambda = 1e-3;
    SubsetLaw law = kdpp_probabilities_enumerate(p, 2, lambda);
    REQUIRE(law.subsets.size() == 3);
    // direct oracle: det(A_S A_S^T + 2 lambda I) per 2x2 block
    std::vector<double> dets;
    for (const auto& subset : law.subsets) {
        BlockSample blk = extract_block(p, subset);
        DenseMatrix g = gram_aat(blk.a_block);
        g(0, 0) += 2.0 * lambda;
        g(1, 1) += 2.0 * lambda;
        dets.push_back(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
    }
    double total = dets[0] + dets[1] + dets[2];
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(law.probs[i] == doctest::Approx(dets[i] / total).epsilon(1e-10));
    double sum = 0.0;
    for (double pr : law.probs) sum += pr;
    CHECK(std::fabs(sum - 1.0) < 1e-12);
}

TEST_CASE("kdpp law tends to uniform as lambda grows") {
    LeastSquaresProblem p = random_problem(7, 3, 13);
    SubsetLaw law = kdpp_probabilities_enumerate(p, 2, 1e6);
    const double unif = 1.0 / static_cast<double>(law.subsets.size());
    for (double pr : law.probs) CHECK(std::fabs(pr - unif) <= 1e-4 * unif);
}

TEST_CASE("kdpp enumeration guard") {
    LeastSquaresProblem p = random_problem(60, 2, 17);
    CHECK_THROWS_AS(kdpp_probabilities_enumerate(p, 20, 1e-3), GuardError);
    CHECK_THROWS_AS(uniform_law(60, 20), GuardError);
}

TEST_CASE("kdpp normalization equals p_k of the kernel eigenvalues") {
    // Cauchy-Binet cross-check: sum over subsets of det(A_S A_S^T + lambda k I)
    // equals e_k(eigenvalues of A A^T + lambda k I).
    LeastSquaresProblem p = random_problem(8, 3, 19);
    const std::size_t k = 3;
    const double lambda = 0.05;
    KahanSum direct;
    for_each_subset(p.rows(), k, [&](const std::vector<std::size_t>& s) {
        BlockSample blk = extract_block(p, s);
        DenseMatrix g = gram_aat(blk.a_block);
        for (std::size_t i = 0; i < k; ++i) g(i, i) += lambda * k;
        direct.add(std::exp(cholesky_logdet(g)));
    });
    DenseMatrix kernel = gram_aat(p.a);
    for (std::size_t i = 0; i < p.rows(); ++i) kernel(i, i) += lambda * k;
    SymEig e = eigh(kernel);
    ElemSymPolys esp = elem_sym(e.values, k);
    CHECK(direct.sum == doctest::Approx(esp.values[k]).epsilon(1e-9));
}

TEST_CASE("kdpp eigen sampler matches the enumerated law") {
    LeastSquaresProblem p = random_problem(6, 3, 23);
    const std::size_t k = 2;
    const double lambda = 0.01;
    SubsetLaw law = kdpp_probabilities_enumerate(p, k, lambda);
    auto idx = subset_index(law);
    KDppEigenSampler sampler(p.a, k, lambda);
    Rng rng(29);
    const std::size_t draws = 50000;
    std::vector<std::size_t> counts(law.subsets.size(), 0);
    for (std::size_t d = 0; d < draws; ++d) ++counts[idx.at(sampler.sample(rng))];
    CHECK(chi_square_test(counts, law.probs, draws) >= 1e-3);
}

TEST_CASE("kdpp eigen sampler with k = m returns the full set") {
    LeastSquaresProblem p = random_problem(4, 3, 31);
    KDppEigenSampler sampler(p.a, 4, 0.5);
    Rng rng(37);
    for (int d = 0; d < 10; ++d) {
        auto s = sampler.sample(rng);
        REQUIRE(s.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) CHECK(s[i] == i);
    }
}

TEST_CASE("kdpp eigen sampler on the zero matrix is uniform") {
    LeastSquaresProblem p;
    p.a = DenseMatrix(5, 2, 0.0);
    p.b = DenseVector(5, 0.0);
    SubsetLaw law = uniform_law(5, 2);
    auto idx = subset_index(law);
    KDppEigenSampler sampler(p.a, 2, 0.7);
    Rng rng(41);
    const std::size_t draws = 50000;
    std::vector<std::size_t> counts(law.subsets.size(), 0);
    for (std::size_t d = 0; d < draws; ++d) ++counts[idx.at(sampler.sample(rng))];
    CHECK(chi_square_test(counts, law.probs, draws) >= 1e-3);
}

TEST_CASE("next_block with uniform sampling extracts exact rows") {
    LeastSquaresProblem p = random_problem(3, 2, 43);
    Rng rng(47);
    BlockSample s = next_block(p, SamplerKind::uniform(2), rng);
    REQUIRE(s.indices.has_value());
    REQUIRE(s.indices->size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        const std::size_t i = (*s.indices)[r];
        CHECK(s.a_block(r, 0) == p.a(i, 0));
        CHECK(s.a_block(r, 1) == p.a(i, 1));
        CHECK(s.b_block[r] == p.b[i]);
    }
}

TEST_CASE("next_block gaussian stream has no indices and the right shape") {
    GaussianProblem gp = gen_gaussian(2, DenseVector{1.0, 1.0}, DenseVector{0.5, -0.5},
                                      0.1, 3);
    Rng rng(53);
    BlockSample s = next_block(gp, SamplerKind::gaussian_stream(4), rng);
    CHECK(!s.indices.has_value());
    CHECK(s.a_block.rows() == 4);
    CHECK(s.a_block.cols() == 2);
}

TEST_CASE("next_block kdpp enumerate frequencies on the isosceles problem") {
    LeastSquaresProblem p = gen_isosceles(0.1);
    SubsetLaw law = kdpp_probabilities_enumerate(p, 2, 1e-3);
    auto idx = subset_index(law);
    BlockSampler sampler(p, SamplerKind::kdpp(2, 1e-3, SamplerKind::KDppMode::Enumerate));
    Rng rng(59);
    const std::size_t draws = 50000;
    std::vector<std::size_t> counts(law.subsets.size(), 0);
    for (std::size_t d = 0; d < draws; ++d) {
        BlockSample s = sampler.next(rng);
        ++counts[idx.at(*s.indices)];
    }
    CHECK(chi_square_test(counts, law.probs, draws) >= 1e-3);
}

TEST_CASE("mismatched sampler and problem kinds are rejected") {
    LeastSquaresProblem p = random_problem(5, 2, 61);
    CHECK_THROWS_AS(BlockSampler(p, SamplerKind::gaussian_stream(2)), ContractError);
    GaussianProblem gp = gen_gaussian(2, DenseVector{1.0, 1.0}, DenseVector{0.0, 0.0},
                                      0.1, 1);
    CHECK_THROWS_AS(BlockSampler(gp, SamplerKind::uniform(2)), ContractError);
    CHECK_THROWS_AS(BlockSampler(p, SamplerKind::uniform(9)), ContractError);
}
