#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "rowsolve/rng.hpp"
#include "rowsolve/samplers_fwd.hpp"
#include "rowsolve/types.hpp"

namespace rowsolve {

/// A finite least-squares problem min ||Ax - b||^2 with optional known
/// minimal-norm solution and metadata describing how it was generated.
struct LeastSquaresProblem {
    DenseMatrix a;
    DenseVector b;
    std::optional<DenseVector> x_star;
    std::optional<double> residual_norm;
    std::map<std::string, std::string> meta;

    std::size_t rows() const { return a.rows(); }
    std::size_t cols() const { return a.cols(); }

    /// Normal-equation and residual invariants; throws ContractError.
    void validate() const;
};

/// Streaming statistical least-squares problem: rows [a^T b] are drawn as
/// z^T L^T with z ~ N(0, I_{n+1}). The factor is block lower-triangular,
/// [[L_n, 0], [(L_n^T x*)^T, noise_std]], which plants the exact solution
/// x* with underlying residual norm noise_std.
struct GaussianProblem {
    DenseMatrix l_factor;  // (n+1) x (n+1)
    DenseVector x_star;    // n
    double noise_std = 0.0;
    std::map<std::string, std::string> meta;

    std::size_t dim() const { return x_star.size(); }
    /// Top-left n x n block L_n.
    DenseMatrix l_n() const;
};

struct ChebyshevSpec {
    enum class CKind { Identity, DecayingSpectrum };
    std::size_t n = 0;
    std::size_t m = 0;
    CKind c_kind = CKind::Identity;
    double exponent = 1.0;  // singular values 1/i^exponent for the decaying kind
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

/// Haar-distributed orthonormal matrix via QR of an iid Gaussian matrix with
/// sign-fixed diagonal.
DenseMatrix random_orthonormal(std::size_t n, Rng& rng);

GaussianProblem gen_gaussian(std::size_t n, const DenseVector& spectrum,
                             const DenseVector& planted_x, double noise_std,
                             std::uint64_t seed);

/// k iid rows from the streaming Gaussian problem; indices are absent.
BlockSample sample_gaussian_block(const GaussianProblem& p, std::size_t k, Rng& rng);

LeastSquaresProblem gen_chebyshev(const ChebyshevSpec& spec);

/// The 3x2 family A=[[0,1],[1,eps^2],[1,-eps^2]], b=(0,1+eps,1-eps) with
/// x* = (1, 2 eps^3/(1+2 eps^4)).
LeastSquaresProblem gen_isosceles(double epsilon);

/// b = A planted_x + N(0, noise_std^2) noise; x_star recomputed by least
/// squares, not assumed equal to planted_x.
LeastSquaresProblem gen_noisy(const DenseMatrix& a, const DenseVector& planted_x,
                              double noise_std, std::uint64_t seed);

void save_problem(const LeastSquaresProblem& p, const std::filesystem::path& dir);
void save_problem(const GaussianProblem& p, const std::filesystem::path& dir);

LeastSquaresProblem load_problem(const std::filesystem::path& dir);

/// Either kind, detected from meta.json.
struct ProblemBundle {
    std::optional<LeastSquaresProblem> finite;
    std::optional<GaussianProblem> gaussian;
    bool is_gaussian() const { return gaussian.has_value(); }
};
ProblemBundle load_bundle(const std::filesystem::path& dir);

}  // namespace rowsolve
