#include "rowsolve/experiment.hpp"

#include <cmath>
#include <fstream>

#include "rowsolve/csvio.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/stats.hpp"

namespace rowsolve {

using nlohmann::json;

SamplerKind SolverSpec::sampler_kind() const {
    switch (sampler_family) {
        case SamplerKind::Family::UniformSubsets: return SamplerKind::uniform(k);
        case SamplerKind::Family::GaussianStream: return SamplerKind::gaussian_stream(k);
        case SamplerKind::Family::KDpp: return SamplerKind::kdpp(k, kdpp_lambda, kdpp_mode);
    }
    throw ContractError("SolverSpec: unknown sampler family");
}

std::size_t SolverSpec::effective_burn_in() const {
    if (burn_in) return *burn_in;
    const auto tb = static_cast<std::size_t>(tb_frac * static_cast<double>(total_iters));
    return tb >= total_iters ? total_iters - 1 : tb;
}

ProblemBundle make_problem_from_spec(const json& spec) {
    require(spec.contains("family"), "problem spec: missing 'family'");
    const std::string family = spec["family"].get<std::string>();
    ProblemBundle bundle;
    if (family == "isosceles") {
        bundle.finite = gen_isosceles(spec.value("epsilon", 0.1));
    } else if (family == "chebyshev") {
        ChebyshevSpec cs;
        cs.n = spec.value("n", 50);
        cs.m = spec.value("m", 2000);
        const double decay = spec.value("decay", 0.0);
        cs.c_kind = decay > 0.0 ? ChebyshevSpec::CKind::DecayingSpectrum
                                : ChebyshevSpec::CKind::Identity;
        cs.exponent = decay > 0.0 ? decay : 1.0;
        cs.noise_std = spec.value("noise_std", 1e-2);
        cs.seed = spec.value("seed", 0);
        bundle.finite = gen_chebyshev(cs);
    } else if (family == "gaussian") {
        const std::size_t n = spec.value("n", 32);
        DenseVector spectrum(n, 1.0);
        if (spec.contains("spectrum")) {
            if (spec["spectrum"].is_array()) {
                require(spec["spectrum"].size() == n, "problem spec: spectrum length != n");
                for (std::size_t i = 0; i < n; ++i) spectrum[i] = spec["spectrum"][i];
            } else {
                const std::string s = spec["spectrum"].get<std::string>();
                if (s.rfind("poly:", 0) == 0) {
                    const double beta = parse_double(s.substr(5));
                    for (std::size_t i = 0; i < n; ++i)
                        spectrum[i] = std::pow(static_cast<double>(i + 1), -beta / 2.0);
                } else if (s != "flat") {
                    throw ContractError("problem spec: unknown spectrum '" + s + "'");
                }
            }
        }
        const std::uint64_t seed = spec.value("seed", 0);
        Rng rng(seed, /*stream=*/0x11aau);
        DenseVector planted(n);
        for (std::size_t i = 0; i < n; ++i) planted[i] = rng.next_gaussian();
        bundle.gaussian =
            gen_gaussian(n, spectrum, planted, spec.value("noise_std", 1e-2), seed);
    } else if (family == "noisy") {
        const std::size_t m = spec.value("m", 2000);
        const std::size_t n = spec.value("n", 50);
        const std::uint64_t seed = spec.value("seed", 0);
        const double decay = spec.value("decay", 0.0);
        Rng rng(seed, /*stream=*/0x22bbu);
        DenseMatrix a(m, n);
        for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.next_gaussian();
        if (decay > 0.0) {
            // A <- A * U with U having singular values i^-decay
            DenseMatrix uh = random_orthonormal(n, rng);
            DenseMatrix vh = random_orthonormal(n, rng);
            DenseMatrix u(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t l = 0; l < n; ++l)
                        s += uh(i, l) * std::pow(static_cast<double>(l + 1), -decay) * vh(j, l);
                    u(i, j) = s;
                }
            a = matmul(a, u);
        }
        DenseVector planted(n);
        for (std::size_t i = 0; i < n; ++i) planted[i] = rng.next_gaussian();
        bundle.finite = gen_noisy(a, planted, spec.value("noise_std", 1e-2), seed);
        bundle.finite->meta["decay"] = format_double(decay);
    } else if (family == "load") {
        require(spec.contains("from"), "problem spec: family 'load' needs 'from'");
        bundle = load_bundle(spec["from"].get<std::string>());
    } else {
        throw ContractError("problem spec: unknown family '" + family + "'");
    }
    return bundle;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open: " + file.string());
    json j;
    in >> j;
    ExperimentConfig cfg;
    if (j.contains("problem")) {
        if (j["problem"].is_string())
            cfg.problem_dir = j["problem"].get<std::string>();
        else
            cfg.problem_inline = j["problem"];
    }
    cfg.out_dir = j.value("out", std::string("results"));
    cfg.record_every = j.value("record_every", 100);
    require(j.contains("solvers") && j["solvers"].is_array(),
            "experiment config: missing 'solvers' array");
    for (const auto& js : j["solvers"]) {
        SolverSpec s;
        const std::string mass = js.value("mass", "rbk");
        if (mass == "rbk")
            s.mass = MassMatrixKind::rbk(js.value("rank_tol", 0.0));
        else if (mass == "reblock")
            s.mass = MassMatrixKind::reblock(js.value("lambda", 1e-3));
        else if (mass == "msgd") {
            if (js.contains("eta"))
                s.mass = MassMatrixKind::msgd(js["eta"].get<double>());
            else {
                s.tune_eta = true;
                s.mass = MassMatrixKind::msgd(1.0);  // placeholder until tuned
                if (js.contains("tune_eta")) {
                    s.tune_lo = js["tune_eta"].value("lo", 1e-4);
                    s.tune_hi = js["tune_eta"].value("hi", 1.0);
                }
            }
        } else {
            throw ContractError("experiment config: unknown mass '" + mass + "'");
        }
        const std::string sampler = js.value("sampler", "uniform");
        if (sampler == "uniform")
            s.sampler_family = SamplerKind::Family::UniformSubsets;
        else if (sampler == "gaussian-stream")
            s.sampler_family = SamplerKind::Family::GaussianStream;
        else if (sampler == "kdpp" || sampler == "kdpp-eigen") {
            s.sampler_family = SamplerKind::Family::KDpp;
            s.kdpp_mode = SamplerKind::KDppMode::EigenSample;
            s.kdpp_lambda = js.value("kdpp_lambda", 1e-3);
        } else if (sampler == "kdpp-enumerate") {
            s.sampler_family = SamplerKind::Family::KDpp;
            s.kdpp_mode = SamplerKind::KDppMode::Enumerate;
            s.kdpp_lambda = js.value("kdpp_lambda", 1e-3);
        } else {
            throw ContractError("experiment config: unknown sampler '" + sampler + "'");
        }
        s.k = js.value("k", 10);
        s.total_iters = js.value("T", 1000);
        if (js.contains("Tb")) s.burn_in = js["Tb"].get<std::size_t>();
        s.tb_frac = js.value("tb_frac", 0.5);
        if (js.contains("seeds"))
            for (const auto& v : js["seeds"]) s.seeds.push_back(v.get<std::uint64_t>());
        require(!s.seeds.empty(), "experiment config: seeds must be nonempty");
        s.label = js.value("label", mass);
        cfg.solvers.push_back(std::move(s));
    }
    return cfg;
}

namespace {

SolverTrace run_on_bundle(const ProblemBundle& problem, const SolverConfig& cfg) {
    if (problem.is_gaussian()) return run(*problem.gaussian, cfg);
    return run(*problem.finite, cfg);
}

struct Agg {
    RunningMoments rel_err, tail_rel_err;
};

}  // namespace

double tune_eta_grid(const ProblemBundle& problem, std::size_t k,
                     SamplerKind::Family sampler_family, double lo, double hi,
                     std::uint64_t seed, std::size_t probe_iters) {
    require(lo > 0.0 && hi >= lo, "tune_eta_grid: need 0 < lo <= hi");
    double best = 0.0;
    for (double eta = lo; eta <= hi * (1.0 + 1e-12); eta *= 2.0) {
        SolverSpec spec;
        spec.mass = MassMatrixKind::msgd(eta);
        spec.sampler_family = sampler_family;
        spec.k = k;
        SolverConfig cfg;
        cfg.mass = spec.mass;
        cfg.sampler = spec.sampler_kind();
        cfg.k = k;
        cfg.total_iters = probe_iters;
        cfg.burn_in = probe_iters / 2;
        cfg.seed = seed;
        cfg.record_every = 5;
        bool stable = true;
        try {
            SolverTrace trace = run_on_bundle(problem, cfg);
            const double initial = 1.0;  // x0 = 0 gives ||b||/||b||
            for (const auto& rec : trace.records)
                if (!std::isfinite(rec.rel_residual) || rec.rel_residual > 10.0 * initial) {
                    stable = false;
                    break;
                }
        } catch (const std::runtime_error&) {
            stable = false;
        }
        if (stable) best = eta;
    }
    if (best == 0.0)
        throw NumericError("tune_eta_grid: no stable step size found on the grid");
    return best;
}

ExperimentResult run_experiment(const ProblemBundle& problem, const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);

    // resolve step sizes first (deterministic, shared by every seed)
    std::vector<SolverSpec> solvers = cfg.solvers;
    for (auto& s : solvers) {
        if (s.mass.kind == MassMatrixKind::Kind::MSgd && s.tune_eta) {
            const double eta = tune_eta_grid(problem, s.k, s.sampler_family, s.tune_lo,
                                             s.tune_hi, s.seeds.front());
            s.mass = MassMatrixKind::msgd(eta);
        }
        if (problem.is_gaussian()) s.sampler_family = SamplerKind::Family::GaussianStream;
    }

    struct Job {
        std::size_t solver_idx;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t si = 0; si < solvers.size(); ++si)
        for (std::uint64_t seed : solvers[si].seeds) jobs.push_back({si, seed});

    std::vector<RunResult> results(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ji = 0; ji < static_cast<std::ptrdiff_t>(jobs.size()); ++ji) {
        const Job& job = jobs[ji];
        const SolverSpec& spec = solvers[job.solver_idx];
        RunResult& rr = results[ji];
        rr.label = spec.label;
        rr.seed = job.seed;
        rr.trace_file =
            cfg.out_dir / (spec.label + "_seed" + std::to_string(job.seed) + ".csv");
        SolverConfig scfg;
        scfg.mass = spec.mass;
        scfg.sampler = spec.sampler_kind();
        scfg.k = spec.k;
        scfg.total_iters = spec.total_iters;
        scfg.burn_in = spec.effective_burn_in();
        scfg.seed = job.seed;
        scfg.record_every = cfg.record_every;
        try {
            SolverTrace trace = run_on_bundle(problem, scfg);
            write_trace_csv(trace, rr.trace_file);
            const TraceRecord& last = trace.records.back();
            rr.final_rel_err = last.rel_err;
            rr.final_tail_rel_err = last.tail_rel_err;
            rr.final_rel_residual = last.rel_residual;
            rr.final_tail_rel_residual = last.tail_rel_residual;
            rr.ok = true;
        } catch (const std::exception& e) {
            rr.ok = false;
            rr.error = e.what();
        }
    }

    ExperimentResult out;
    out.runs = results;
    json summary;
    summary["record_every"] = cfg.record_every;
    json jsolvers = json::array();
    bool any_ok = false;
    for (std::size_t si = 0; si < solvers.size(); ++si) {
        const SolverSpec& spec = solvers[si];
        json js;
        js["label"] = spec.label;
        js["mass"] = spec.mass.name();
        if (spec.mass.kind == MassMatrixKind::Kind::ReBlocK) js["lambda"] = spec.mass.lambda;
        if (spec.mass.kind == MassMatrixKind::Kind::MSgd) js["eta"] = spec.mass.step_size;
        js["sampler"] = spec.sampler_kind().name();
        js["k"] = spec.k;
        js["T"] = spec.total_iters;
        js["Tb"] = spec.effective_burn_in();
        json seeds = json::array();
        for (auto s : spec.seeds) seeds.push_back(s);
        js["seeds"] = seeds;
        Agg agg;
        json traces = json::array();
        json failures = json::array();
        for (const RunResult& rr : results) {
            if (rr.label != spec.label) continue;
            if (!rr.ok) {
                json f;
                f["seed"] = rr.seed;
                f["error"] = rr.error;
                failures.push_back(f);
                continue;
            }
            any_ok = true;
            traces.push_back(rr.trace_file.filename().string());
            if (rr.final_rel_err) agg.rel_err.update(*rr.final_rel_err);
            if (rr.final_tail_rel_err) agg.tail_rel_err.update(*rr.final_tail_rel_err);
        }
        auto stats_json = [](const RunningMoments& m) {
            json j;
            j["count"] = m.count;
            j["mean"] = m.count ? m.mean : 0.0;
            j["std"] = m.count > 1 ? std::sqrt(m.variance()) : 0.0;
            return j;
        };
        js["final_rel_err"] = stats_json(agg.rel_err);
        js["final_tail_rel_err"] = stats_json(agg.tail_rel_err);
        js["traces"] = traces;
        js["failures"] = failures;
        jsolvers.push_back(js);
    }
    summary["solvers"] = jsolvers;
    out.summary = summary;
    out.all_failed = !any_ok;

    std::ofstream sf(cfg.out_dir / "summary.json");
    if (!sf) throw IoError("cannot open for writing: " + (cfg.out_dir / "summary.json").string());
    sf << summary.dump(2) << "\n";
    return out;
}

}  // namespace rowsolve
