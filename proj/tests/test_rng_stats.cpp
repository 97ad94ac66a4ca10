#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rowsolve/rng.hpp"
#include "rowsolve/stats.hpp"

using namespace rowsolve;

TEST_CASE("rng is reproducible and stream-separated") {
    Rng a(42), b(42), c(43), d(42, 1);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
        CHECK(x != d.next_u64());
    }
}

TEST_CASE("next_below is in range and roughly uniform") {
    Rng rng(7);
    std::vector<std::size_t> counts(10, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[rng.next_below(10)];
    for (std::size_t c : counts) {
        CHECK(c > draws / 10 - 5 * std::sqrt(draws / 10.0));
        CHECK(c < draws / 10 + 5 * std::sqrt(draws / 10.0));
    }
}

TEST_CASE("gaussian moments") {
    Rng rng(11);
    RunningMoments m;
    for (int i = 0; i < 200000; ++i) m.update(rng.next_gaussian());
    CHECK(std::fabs(m.mean) < 4.0 * m.std_error());
    CHECK(m.variance() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("chi-square survival function against known quantiles") {
    // chi2(0.999, 14) ~ 36.123; chi2(0.999, 3) ~ 16.266 (standard tables)
    CHECK(chi_square_sf(36.123, 14.0) == doctest::Approx(1e-3).epsilon(0.01));
    CHECK(chi_square_sf(16.266, 3.0) == doctest::Approx(1e-3).epsilon(0.01));
    CHECK(chi_square_sf(0.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("welford matrix moments match direct computation") {
    Rng rng(5);
    MatrixMoments mm(2, 2);
    std::vector<DenseMatrix> samples;
    for (int s = 0; s < 50; ++s) {
        DenseMatrix x(2, 2);
        for (std::size_t i = 0; i < 4; ++i) x.data()[i] = rng.next_gaussian();
        samples.push_back(x);
        mm.update(x);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s.data()[i];
        mean /= samples.size();
        CHECK(mm.mean().data()[i] == doctest::Approx(mean).epsilon(1e-12));
        double var = 0.0;
        for (const auto& s : samples) var += (s.data()[i] - mean) * (s.data()[i] - mean);
        var /= (samples.size() - 1);
        const double se = std::sqrt(var / samples.size());
        CHECK(mm.std_error().data()[i] == doctest::Approx(se).epsilon(1e-10));
    }
}

TEST_CASE("vector moments combined standard error") {
    VectorMoments vm(3);
    Rng rng(9);
    for (int s = 0; s < 100; ++s) {
        DenseVector v(3);
        for (std::size_t i = 0; i < 3; ++i) v[i] = rng.next_gaussian();
        vm.update(v);
    }
    DenseVector se = vm.std_error();
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += se[i] * se[i];
    CHECK(vm.combined_std_error() == doctest::Approx(std::sqrt(sum)).epsilon(1e-12));
}
