#include "rowsolve/stats.hpp"

#include <cmath>

namespace rowsolve {

double RunningMoments::std_error() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

void MatrixMoments::update(const DenseMatrix& sample) {
    require(sample.rows() == mean_.rows() && sample.cols() == mean_.cols(),
            "MatrixMoments: shape mismatch");
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        const double x = sample.data()[i];
        const double d = x - mean_.data()[i];
        mean_.data()[i] += d * inv;
        m2_.data()[i] += d * (x - mean_.data()[i]);
    }
}

DenseMatrix MatrixMoments::std_error() const {
    DenseMatrix se(mean_.rows(), mean_.cols());
    if (count_ > 1) {
        const double denom = static_cast<double>(count_ - 1) * static_cast<double>(count_);
        for (std::size_t i = 0; i < se.size(); ++i)
            se.data()[i] = std::sqrt(m2_.data()[i] / denom);
    }
    return se;
}

void VectorMoments::update(const DenseVector& sample) {
    require(sample.size() == mean_.size(), "VectorMoments: shape mismatch");
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < mean_.size(); ++i) {
        const double x = sample[i];
        const double d = x - mean_[i];
        mean_[i] += d * inv;
        m2_[i] += d * (x - mean_[i]);
    }
}

DenseVector VectorMoments::std_error() const {
    DenseVector se(mean_.size());
    if (count_ > 1) {
        const double denom = static_cast<double>(count_ - 1) * static_cast<double>(count_);
        for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::sqrt(m2_[i] / denom);
    }
    return se;
}

double VectorMoments::combined_std_error() const {
    DenseVector se = std_error();
    double s = 0.0;
    for (std::size_t i = 0; i < se.size(); ++i) s += se[i] * se[i];
    return std::sqrt(s);
}

// Series and continued-fraction evaluation of the regularized incomplete
// gamma function (Numerical Recipes style).
namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chi_square_sf(double x, double dof) {
    return gamma_q(0.5 * dof, 0.5 * x);
}

double chi_square_test(const std::vector<std::size_t>& observed,
                       const std::vector<double>& probs, std::size_t draws) {
    require(observed.size() == probs.size(), "chi_square_test: size mismatch");
    double stat = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double expect = probs[i] * static_cast<double>(draws);
        if (expect <= 0.0) {
            if (observed[i] > 0) return 0.0;
            continue;
        }
        const double d = static_cast<double>(observed[i]) - expect;
        stat += d * d / expect;
    }
    return chi_square_sf(stat, static_cast<double>(probs.size() - 1));
}

}  // namespace rowsolve
