#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "rowsolve/problem.hpp"
#include "rowsolve/samplers.hpp"
#include "rowsolve/types.hpp"

namespace rowsolve {

/// Mass matrix choice for the generalized update
/// x <- x + A_S^T M(A_S) (b_S - A_S x):
///   Rbk      M = (A_S A_S^T)^+        (block projection)
///   ReBlocK  M = (A_S A_S^T + lambda k I)^{-1}
///   MSgd     M = (eta / k) I          (averaged gradient step)
struct MassMatrixKind {
    enum class Kind { Rbk, ReBlocK, MSgd };
    Kind kind = Kind::Rbk;
    double rank_tol = 0.0;   // Rbk; 0 selects the default numerical-rank rule
    double lambda = 1e-3;    // ReBlocK
    double step_size = 0.0;  // MSgd

    static MassMatrixKind rbk(double rank_tol = 0.0) {
        require(rank_tol >= 0.0, "MassMatrixKind: rank_tol must be >= 0");
        MassMatrixKind m;
        m.kind = Kind::Rbk;
        m.rank_tol = rank_tol;
        return m;
    }
    static MassMatrixKind reblock(double lambda = 1e-3) {
        require(lambda > 0.0, "MassMatrixKind: lambda must be > 0");
        MassMatrixKind m;
        m.kind = Kind::ReBlocK;
        m.lambda = lambda;
        return m;
    }
    static MassMatrixKind msgd(double eta) {
        require(eta > 0.0, "MassMatrixKind: step size must be > 0");
        MassMatrixKind m;
        m.kind = Kind::MSgd;
        m.step_size = eta;
        return m;
    }

    std::string name() const;
};

struct SolverConfig {
    MassMatrixKind mass;
    SamplerKind sampler;
    std::size_t k = 1;
    std::size_t total_iters = 0;  // T
    std::size_t burn_in = 0;      // T_b
    std::uint64_t seed = 0;
    std::optional<DenseVector> x0;  // absent = zero
    std::size_t record_every = 1;

    void validate() const;
};

struct TraceRecord {
    std::size_t iter = 0;
    double wall_seconds = 0.0;
    std::optional<double> rel_err;
    double rel_residual = 0.0;
    std::optional<double> tail_rel_err;
    std::optional<double> tail_rel_residual;
};

struct SolverTrace {
    std::vector<TraceRecord> records;
    DenseVector final_x;
    DenseVector final_tail_x;
};

/// One generalized iteration step; pure function of its inputs.
DenseVector apply_update(const DenseVector& x, const BlockSample& block,
                         const MassMatrixKind& mass);

/// Runs Alg-style iteration with incremental tail averaging. Deterministic
/// given cfg.seed. `iterates`, when given, receives x_1..x_T (test hook).
SolverTrace run(const LeastSquaresProblem& problem, const SolverConfig& cfg,
                std::vector<DenseVector>* iterates = nullptr);
SolverTrace run(const GaussianProblem& problem, const SolverConfig& cfg,
                std::vector<DenseVector>* iterates = nullptr);

/// Direct tail average of a stream x_1..x_T: mean of x_{T_b+1}..x_T.
DenseVector tail_average(const std::vector<DenseVector>& xs, std::size_t t_b);

/// Trace CSV: header iter,wall_seconds,rel_err,rel_residual,tail_rel_err,
/// tail_rel_residual; empty fields for unavailable metrics.
void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& file);
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& file);

}  // namespace rowsolve
