#include "rowsolve/solver.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "rowsolve/csvio.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"

namespace rowsolve {

std::string MassMatrixKind::name() const {
    switch (kind) {
        case Kind::Rbk: return "rbk";
        case Kind::ReBlocK: return "reblock";
        case Kind::MSgd: return "msgd";
    }
    return "?";
}

void SolverConfig::validate() const {
    require(k >= 1, "SolverConfig: k must be >= 1");
    require(sampler.k == k, "SolverConfig: sampler block size must match k");
    require(total_iters >= 1, "SolverConfig: T must be >= 1");
    require(burn_in < total_iters, "SolverConfig: need 0 <= T_b < T");
    require(record_every >= 1, "SolverConfig: record_every must be >= 1");
    if (mass.kind == MassMatrixKind::Kind::ReBlocK)
        require(mass.lambda > 0.0, "SolverConfig: ReBlocK lambda must be > 0");
    if (mass.kind == MassMatrixKind::Kind::MSgd)
        require(mass.step_size > 0.0, "SolverConfig: mSGD step size must be > 0");
}

DenseVector apply_update(const DenseVector& x, const BlockSample& block,
                         const MassMatrixKind& mass) {
    const std::size_t k = block.k();
    require(x.size() == block.a_block.cols(), "apply_update: dimension mismatch");
    require(block.b_block.size() == k, "apply_update: block shapes disagree");
    DenseVector r = residual(block.a_block, x, block.b_block);
    DenseVector out = x;
    switch (mass.kind) {
        case MassMatrixKind::Kind::Rbk: {
            DenseVector dx = (mass.rank_tol > 0.0)
                                 ? pseudoinverse_apply(block.a_block, r, mass.rank_tol)
                                 : qr_lstsq(block.a_block, r);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += dx[i];
            break;
        }
        case MassMatrixKind::Kind::ReBlocK: {
            DenseMatrix g = gram_aat(block.a_block);
            const double shift = mass.lambda * static_cast<double>(k);
            for (std::size_t i = 0; i < k; ++i) g(i, i) += shift;
            DenseVector t = cholesky_solve_spd(g, r);
            DenseVector dx = matvec_t(block.a_block, t);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += dx[i];
            break;
        }
        case MassMatrixKind::Kind::MSgd: {
            DenseVector dx = matvec_t(block.a_block, r);
            const double scale = mass.step_size / static_cast<double>(k);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * dx[i];
            break;
        }
    }
    return out;
}

namespace {

struct FiniteMetrics {
    const LeastSquaresProblem* p;
    double b_norm;
    double x_star_norm;

    explicit FiniteMetrics(const LeastSquaresProblem& prob) : p(&prob) {
        b_norm = nrm2(prob.b);
        x_star_norm = prob.x_star ? nrm2(*prob.x_star) : 0.0;
    }
    double rel_residual(const DenseVector& x, const BlockSample&) const {
        return nrm2(residual(p->a, x, p->b)) / (b_norm > 0.0 ? b_norm : 1.0);
    }
    std::optional<double> rel_err(const DenseVector& x) const {
        if (!p->x_star) return std::nullopt;
        return nrm2_diff(x, *p->x_star) / (x_star_norm > 0.0 ? x_star_norm : 1.0);
    }
};

// Streaming problems have no full residual; it is estimated from the block
// available at the recording iteration.
struct StreamingMetrics {
    const GaussianProblem* p;
    double x_star_norm;

    explicit StreamingMetrics(const GaussianProblem& prob) : p(&prob) {
        x_star_norm = nrm2(prob.x_star);
    }
    double rel_residual(const DenseVector& x, const BlockSample& blk) const {
        const double bn = nrm2(blk.b_block);
        return nrm2(residual(blk.a_block, x, blk.b_block)) / (bn > 0.0 ? bn : 1.0);
    }
    std::optional<double> rel_err(const DenseVector& x) const {
        return nrm2_diff(x, p->x_star) / (x_star_norm > 0.0 ? x_star_norm : 1.0);
    }
};

template <typename ProblemT, typename MetricsT>
SolverTrace run_impl(const ProblemT& problem, std::size_t n, const SolverConfig& cfg,
                     std::vector<DenseVector>* iterates) {
    cfg.validate();
    if (cfg.x0) require(cfg.x0->size() == n, "run: x0 dimension mismatch");

    BlockSampler sampler(problem, cfg.sampler);
    MetricsT metrics(problem);
    Rng rng(cfg.seed);

    DenseVector x = cfg.x0 ? *cfg.x0 : DenseVector(n, 0.0);
    DenseVector xbar(n, 0.0);

    SolverTrace trace;
    if (iterates) {
        iterates->clear();
        iterates->reserve(cfg.total_iters);
    }

    using clock = std::chrono::steady_clock;
    double wall = 0.0;
    for (std::size_t t = 1; t <= cfg.total_iters; ++t) {
        const auto t0 = clock::now();
        BlockSample block = sampler.next(rng);
        try {
            x = apply_update(x, block, cfg.mass);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("iteration " + std::to_string(t) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("iteration " + std::to_string(t) + ": " + e.what());
        }
        if (t > cfg.burn_in) {
            const double w = 1.0 / static_cast<double>(t - cfg.burn_in);
            for (std::size_t i = 0; i < n; ++i) xbar[i] += (x[i] - xbar[i]) * w;
        }
        wall += std::chrono::duration<double>(clock::now() - t0).count();

        if (iterates) iterates->push_back(x);
        if (t % cfg.record_every == 0 || t == cfg.total_iters) {
            TraceRecord rec;
            rec.iter = t;
            rec.wall_seconds = wall;
            rec.rel_err = metrics.rel_err(x);
            rec.rel_residual = metrics.rel_residual(x, block);
            if (t > cfg.burn_in) {
                rec.tail_rel_err = metrics.rel_err(xbar);
                rec.tail_rel_residual = metrics.rel_residual(xbar, block);
            }
            trace.records.push_back(std::move(rec));
        }
    }
    trace.final_x = std::move(x);
    trace.final_tail_x = std::move(xbar);
    return trace;
}

}  // namespace

SolverTrace run(const LeastSquaresProblem& problem, const SolverConfig& cfg,
                std::vector<DenseVector>* iterates) {
    require(cfg.sampler.family != SamplerKind::Family::GaussianStream,
            "run: GaussianStream sampler requires a GaussianProblem");
    return run_impl<LeastSquaresProblem, FiniteMetrics>(problem, problem.cols(), cfg, iterates);
}

SolverTrace run(const GaussianProblem& problem, const SolverConfig& cfg,
                std::vector<DenseVector>* iterates) {
    require(cfg.sampler.family == SamplerKind::Family::GaussianStream,
            "run: a GaussianProblem requires the GaussianStream sampler");
    return run_impl<GaussianProblem, StreamingMetrics>(problem, problem.dim(), cfg, iterates);
}

DenseVector tail_average(const std::vector<DenseVector>& xs, std::size_t t_b) {
    require(!xs.empty() && t_b < xs.size(), "tail_average: need T > T_b");
    const std::size_t n = xs[0].size();
    DenseVector acc(n, 0.0);
    for (std::size_t t = t_b; t < xs.size(); ++t)
        for (std::size_t i = 0; i < n; ++i) acc[i] += xs[t][i];
    const double scale = 1.0 / static_cast<double>(xs.size() - t_b);
    for (std::size_t i = 0; i < n; ++i) acc[i] *= scale;
    return acc;
}

void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << "iter,wall_seconds,rel_err,rel_residual,tail_rel_err,tail_rel_residual\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const TraceRecord& r : trace.records) {
        out << r.iter << "," << format_double(r.wall_seconds) << "," << opt(r.rel_err) << ","
            << format_double(r.rel_residual) << "," << opt(r.tail_rel_err) << ","
            << opt(r.tail_rel_residual) << "\n";
    }
    if (!out) throw IoError("write failed: " + file.string());
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open: " + file.string());
    std::string line;
    if (!std::getline(in, line) ||
        line != "iter,wall_seconds,rel_err,rel_residual,tail_rel_err,tail_rel_residual")
        throw IoError("bad trace header in " + file.string());
    std::vector<TraceRecord> recs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> tok;
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            tok.push_back(comma == std::string::npos ? line.substr(pos)
                                                     : line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (tok.size() != 6) throw IoError("bad trace row in " + file.string());
        TraceRecord r;
        r.iter = static_cast<std::size_t>(std::stoull(tok[0]));
        r.wall_seconds = parse_double(tok[1]);
        if (!tok[2].empty()) r.rel_err = parse_double(tok[2]);
        r.rel_residual = parse_double(tok[3]);
        if (!tok[4].empty()) r.tail_rel_err = parse_double(tok[4]);
        if (!tok[5].empty()) r.tail_rel_residual = parse_double(tok[5]);
        recs.push_back(r);
    }
    return recs;
}

}  // namespace rowsolve
