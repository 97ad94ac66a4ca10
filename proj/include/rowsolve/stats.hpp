#pragma once

#include <cstddef>

#include "rowsolve/types.hpp"

namespace rowsolve {

/// Welford running mean/variance for scalars.
struct RunningMoments {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void update(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double std_error() const;
};

/// Entrywise Welford moments for a stream of equally-shaped matrices.
class MatrixMoments {
  public:
    MatrixMoments() = default;
    MatrixMoments(std::size_t rows, std::size_t cols)
        : mean_(rows, cols), m2_(rows, cols), count_(0) {}

    void update(const DenseMatrix& sample);
    std::size_t count() const { return count_; }
    const DenseMatrix& mean() const { return mean_; }
    /// Entrywise standard error of the mean.
    DenseMatrix std_error() const;

  private:
    DenseMatrix mean_, m2_;
    std::size_t count_ = 0;
};

/// Entrywise Welford moments for a stream of vectors.
class VectorMoments {
  public:
    VectorMoments() = default;
    explicit VectorMoments(std::size_t n) : mean_(n), m2_(n), count_(0) {}

    void update(const DenseVector& sample);
    std::size_t count() const { return count_; }
    const DenseVector& mean() const { return mean_; }
    DenseVector std_error() const;
    /// sqrt(sum of squared per-coordinate standard errors); the natural scale
    /// of ||mean|| under the null that the true mean is zero.
    double combined_std_error() const;

  private:
    DenseVector mean_, m2_;
    std::size_t count_ = 0;
};

/// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Chi-square survival function Pr[X > x] with dof degrees of freedom.
double chi_square_sf(double x, double dof);

/// Pearson chi-square statistic of observed counts against expected
/// probabilities; returns the survival-function p-value.
double chi_square_test(const std::vector<std::size_t>& observed,
                       const std::vector<double>& probs, std::size_t draws);

}  // namespace rowsolve
