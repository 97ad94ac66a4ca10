#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rowsolve/problem.hpp"
#include "rowsolve/samplers.hpp"
#include "rowsolve/solver.hpp"
#include "rowsolve/types.hpp"

namespace rowsolve {

enum class OracleMode { Enumerate, MonteCarlo };

struct BoundEntry {
    std::string name;
    double bound_value = 0.0;
    double actual_value = 0.0;
    bool holds = false;
};

struct BoundLedger {
    std::vector<BoundEntry> entries;

    /// actual <= bound (+ slack)
    void add_le(const std::string& name, double actual, double bound, double slack);
    /// actual >= bound (- slack)
    void add_ge(const std::string& name, double actual, double bound, double slack);
    bool all_hold() const;
    const BoundEntry* find(const std::string& name) const;
};

/// Ground-truth quantities of the convergence theorems for one
/// (problem, mass, sampling law) triple.
struct OracleReport {
    DenseMatrix w_bar;  // m x m
    DenseMatrix p_bar;  // n x n
    DenseVector x_rho;
    DenseVector r_rho;
    double alpha = 0.0;
    double kappa_w = 0.0;  // +inf encoded as infinity() when W_bar is singular
    double variance_v = 0.0;
    double bias_norm = 0.0;
    double max_block_pinv_sq = 0.0;  // max_S ||A_S^+||^2, reported for visibility
    OracleMode mode = OracleMode::Enumerate;
    std::size_t draws = 0;
    double max_std_error = 0.0;  // MonteCarlo: max entrywise SE over W/P estimates
    BoundLedger ledger;
};

/// The k x k mass matrix M(A_S) for a block.
DenseMatrix mass_matrix(const DenseMatrix& a_block, const MassMatrixKind& mass);

/// The sampling law for enumeration: uniform or KDpp{Enumerate}.
SubsetLaw enumerable_law(const LeastSquaresProblem& p, std::size_t k,
                         const SamplerKind& sampler);

/// Exact probability-weighted sums of W(S) = I_S^T M(A_S) I_S and
/// P(S) = A_S^T M(A_S) A_S over all subsets of the law. Verifies
/// P_bar = A^T W_bar A internally to 1e-10.
std::pair<DenseMatrix, DenseMatrix> enumerate_wbar_pbar(const LeastSquaresProblem& p,
                                                        std::size_t k,
                                                        const MassMatrixKind& mass,
                                                        const SamplerKind& sampler);

struct McEstimate {
    DenseMatrix p_bar_mean, p_bar_se;
    DenseMatrix w_bar_mean, w_bar_se;  // empty when the law has no indices
    bool has_w_bar = false;
    std::size_t draws = 0;
};
McEstimate montecarlo_wbar_pbar(const LeastSquaresProblem& p, std::size_t k,
                                const MassMatrixKind& mass, const SamplerKind& sampler,
                                std::size_t draws, std::uint64_t seed);
McEstimate montecarlo_wbar_pbar(const GaussianProblem& p, std::size_t k,
                                const MassMatrixKind& mass, std::size_t draws,
                                std::uint64_t seed);

/// Minimal-norm minimizer of ||Ax - b||_{W_bar} plus its residual b - A x.
std::pair<DenseVector, DenseVector> weighted_solution(const LeastSquaresProblem& p,
                                                      const DenseMatrix& w_bar);

/// V = E_S || additive update term at x_rho ||^2 under the enumerable law.
double variance_v(const LeastSquaresProblem& p, const SubsetLaw& law,
                  const MassMatrixKind& mass, const DenseVector& r_rho);

/// sigma_min^+ of P_bar restricted to range(A^T): the rank comes from A's
/// numerical rank, not P_bar's spectrum.
double alpha_from_pbar(const LeastSquaresProblem& p, const DenseMatrix& p_bar);

/// kappa(W_bar) = lambda_max / lambda_min; +inf when numerically singular.
double kappa_of(const DenseMatrix& w_bar);

/// Theorem bound ledger (condition number, weighted residual, bias,
/// variance) plus internal consistency entries. Requires Enumerate mode and
/// the uniform law; `mass` selects which theorem's bounds are evaluated.
BoundLedger check_bounds_rbk(const LeastSquaresProblem& p, std::size_t k,
                             const OracleReport& report);
BoundLedger check_bounds_reblock(const LeastSquaresProblem& p, std::size_t k,
                                 double lambda, const OracleReport& report);

/// The Gaussian-data lower bound on alpha evaluated with C_{n,k} = 1.
double gaussian_alpha_bound(const DenseVector& spectrum, std::size_t k);

/// Monte Carlo checks of the Gaussian-data theorem: (i) the additive update
/// term has mean 0, (ii) V <= 200/sigma_{2k}^2 * E[(a^T x* - b)^2],
/// (iii) alpha >= the closed-form lower bound (C=1) minus 3 SE.
BoundLedger check_gaussian_identity(const GaussianProblem& gp, std::size_t k,
                                    std::size_t draws, std::uint64_t seed);

/// Closed-form W_bar under k-DPP(AA^T + lambda k I) sampling, from the full
/// SVD of A and elementary symmetric polynomials of the kernel eigenvalues.
DenseMatrix dpp_wbar_closed_form(const LeastSquaresProblem& p, std::size_t k, double lambda);

struct DppAlphaBound {
    double bound = 0.0;
    double kappa_ell_sq = 0.0;
    double kappa_dem_sq = 0.0;
};
DppAlphaBound dpp_alpha_bound(const LeastSquaresProblem& p, std::size_t k, double lambda,
                              std::size_t ell);

struct OracleOptions {
    OracleMode mode = OracleMode::Enumerate;
    std::size_t draws = 0;
    std::uint64_t seed = 0;
    bool with_bounds = true;
};

OracleReport compute_oracle(const LeastSquaresProblem& p, std::size_t k,
                            const MassMatrixKind& mass, const SamplerKind& sampler,
                            const OracleOptions& opts = {});

void save_oracle_json(const OracleReport& report, const std::filesystem::path& file);

}  // namespace rowsolve
