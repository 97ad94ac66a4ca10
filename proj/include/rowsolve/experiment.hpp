#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rowsolve/problem.hpp"
#include "rowsolve/solver.hpp"

namespace rowsolve {

/// One solver row of an experiment: mass kind + parameters, block size,
/// iteration budget, and the seed list to fan out over.
struct SolverSpec {
    MassMatrixKind mass;
    SamplerKind::Family sampler_family = SamplerKind::Family::UniformSubsets;
    SamplerKind::KDppMode kdpp_mode = SamplerKind::KDppMode::EigenSample;
    double kdpp_lambda = 1e-3;
    bool tune_eta = false;
    double tune_lo = 1e-4;
    double tune_hi = 1.0;
    std::size_t k = 1;
    std::size_t total_iters = 1;
    std::optional<std::size_t> burn_in;  // absent: tb_frac * T
    double tb_frac = 0.5;
    std::vector<std::uint64_t> seeds;
    std::string label;

    SamplerKind sampler_kind() const;
    std::size_t effective_burn_in() const;
};

struct ExperimentConfig {
    std::filesystem::path problem_dir;     // used when problem_inline is null
    nlohmann::json problem_inline;         // generator spec, optional
    std::vector<SolverSpec> solvers;
    std::filesystem::path out_dir;
    std::size_t record_every = 100;
};

struct RunResult {
    std::string label;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::filesystem::path trace_file;
    std::optional<double> final_rel_err;
    std::optional<double> final_tail_rel_err;
    double final_rel_residual = 0.0;
    std::optional<double> final_tail_rel_residual;
};

struct ExperimentResult {
    std::vector<RunResult> runs;
    nlohmann::json summary;
    bool all_failed = false;
};

/// Builds a problem from an inline generator spec (same families as the
/// generate subcommand).
ProblemBundle make_problem_from_spec(const nlohmann::json& spec);

ExperimentConfig load_experiment_config(const std::filesystem::path& file);

/// Runs every (solver, seed) pair, seed-parallel, writing one trace CSV per
/// run plus summary.json under cfg.out_dir.
ExperimentResult run_experiment(const ProblemBundle& problem, const ExperimentConfig& cfg);

/// Largest stable step size on a doubling grid in [lo, hi]. A probe run is
/// unstable when its relative residual exceeds 10x the initial value.
double tune_eta_grid(const ProblemBundle& problem, std::size_t k,
                     SamplerKind::Family sampler_family, double lo, double hi,
                     std::uint64_t seed, std::size_t probe_iters = 300);

}  // namespace rowsolve
