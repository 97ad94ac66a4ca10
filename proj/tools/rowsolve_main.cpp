// rowsolve: randomized block row-access least-squares solvers (RBK, ReBlocK,
// mSGD) with tail averaging, block-sampling distributions, and an exact
// oracle for the convergence quantities and their theorem bounds.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rowsolve/csvio.hpp"
#include "rowsolve/experiment.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"
#include "rowsolve/oracle.hpp"
#include "rowsolve/problem.hpp"
#include "rowsolve/samplers.hpp"
#include "rowsolve/solver.hpp"

using namespace rowsolve;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void apply_thread_cap() {
#if defined(_OPENMP)
    if (const char* env = std::getenv("ROWSOLVE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) omp_set_num_threads(std::min(cap, omp_get_max_threads()));
    }
#endif
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        const std::string tok =
            comma == std::string::npos ? s.substr(pos) : s.substr(pos, comma - pos);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    require(!seeds.empty(), "expected a nonempty comma-separated seed list");
    return seeds;
}

struct GenerateArgs {
    std::string family;
    std::string out;
    double epsilon = 0.1;
    std::size_t n = 50, m = 2000;
    double decay = 0.0;
    double noise_std = 1e-2;
    std::uint64_t seed = 0;
    std::string spectrum = "flat";
    std::string from;
};

int cmd_generate(const GenerateArgs& args) {
    json spec;
    spec["family"] = args.family;
    if (args.family == "isosceles") {
        spec["epsilon"] = args.epsilon;
    } else if (args.family == "chebyshev") {
        spec["n"] = args.n;
        spec["m"] = args.m;
        spec["decay"] = args.decay;
        spec["noise_std"] = args.noise_std;
        spec["seed"] = args.seed;
    } else if (args.family == "gaussian") {
        spec["n"] = args.n;
        spec["spectrum"] = args.spectrum;
        spec["noise_std"] = args.noise_std;
        spec["seed"] = args.seed;
    } else if (args.family == "noisy") {
        spec["n"] = args.n;
        spec["m"] = args.m;
        spec["decay"] = args.decay;
        spec["noise_std"] = args.noise_std;
        spec["seed"] = args.seed;
    } else if (args.family == "load") {
        spec["from"] = args.from;
    } else {
        throw ContractError("generate: unknown family '" + args.family + "'");
    }

    ProblemBundle bundle = make_problem_from_spec(spec);
    if (bundle.is_gaussian()) {
        save_problem(*bundle.gaussian, args.out);
        const auto& g = *bundle.gaussian;
        std::cout << "gaussian problem: n=" << g.dim() << " noise_std=" << g.noise_std
                  << " (streaming; L factor written)\n";
    } else {
        save_problem(*bundle.finite, args.out);
        const auto& p = *bundle.finite;
        DenseVector sig = singular_values(p.a);
        const double smin =
            min_nonzero_singular_value(p.a, default_rank_tol(p.rows(), p.cols()));
        std::cout << "problem: m=" << p.rows() << " n=" << p.cols()
                  << " kappa=" << (smin > 0 ? sig[0] / smin : 0.0);
        if (p.residual_norm) std::cout << " |r|=" << *p.residual_norm;
        std::cout << "\n";
    }
    std::cout << "wrote bundle to " << args.out << "\n";
    return kExitOk;
}

struct SolveArgs {
    std::string problem;
    std::string config;
    std::string out = "results";
    std::string solver = "rbk";
    std::size_t k = 10;
    std::size_t total_iters = 1000;
    long long tb = -1;
    double tb_frac = 0.5;
    std::string seeds = "0";
    double lambda = 1e-3;
    double eta = 0.0;
    std::string tune_eta;
    std::size_t record_every = 100;
    std::string sampler = "uniform";
    double kdpp_lambda = 1e-3;
};

int cmd_solve(const SolveArgs& args) {
    ExperimentConfig cfg;
    ProblemBundle bundle;
    if (!args.config.empty()) {
        cfg = load_experiment_config(args.config);
        if (!args.out.empty()) cfg.out_dir = args.out;
        bundle = cfg.problem_inline.is_null() ? load_bundle(cfg.problem_dir)
                                              : make_problem_from_spec(cfg.problem_inline);
    } else {
        require(!args.problem.empty(), "solve: --problem or --config is required");
        bundle = load_bundle(args.problem);
        SolverSpec spec;
        if (args.solver == "rbk")
            spec.mass = MassMatrixKind::rbk();
        else if (args.solver == "reblock")
            spec.mass = MassMatrixKind::reblock(args.lambda);
        else if (args.solver == "msgd") {
            if (!args.tune_eta.empty()) {
                spec.tune_eta = true;
                spec.mass = MassMatrixKind::msgd(1.0);
                std::string g = args.tune_eta;
                if (g.rfind("grid:", 0) == 0) g = g.substr(5);
                const auto dots = g.find("..");
                require(dots != std::string::npos, "solve: --tune-eta expects grid:lo..hi");
                spec.tune_lo = parse_double(g.substr(0, dots));
                spec.tune_hi = parse_double(g.substr(dots + 2));
            } else {
                require(args.eta > 0.0, "solve: msgd requires --eta or --tune-eta");
                spec.mass = MassMatrixKind::msgd(args.eta);
            }
        } else {
            throw ContractError("solve: unknown solver '" + args.solver + "'");
        }
        if (args.sampler == "uniform")
            spec.sampler_family = SamplerKind::Family::UniformSubsets;
        else if (args.sampler == "kdpp" || args.sampler == "kdpp-eigen") {
            spec.sampler_family = SamplerKind::Family::KDpp;
            spec.kdpp_lambda = args.kdpp_lambda;
        } else if (args.sampler == "kdpp-enumerate") {
            spec.sampler_family = SamplerKind::Family::KDpp;
            spec.kdpp_mode = SamplerKind::KDppMode::Enumerate;
            spec.kdpp_lambda = args.kdpp_lambda;
        } else {
            throw ContractError("solve: unknown sampler '" + args.sampler + "'");
        }
        if (bundle.is_gaussian()) spec.sampler_family = SamplerKind::Family::GaussianStream;
        spec.k = args.k;
        spec.total_iters = args.total_iters;
        if (args.tb >= 0) spec.burn_in = static_cast<std::size_t>(args.tb);
        spec.tb_frac = args.tb_frac;
        spec.seeds = parse_seed_list(args.seeds);
        spec.label = args.solver;
        cfg.solvers.push_back(spec);
        cfg.out_dir = args.out;
        cfg.record_every = args.record_every;
    }

    ExperimentResult res = run_experiment(bundle, cfg);
    for (const RunResult& rr : res.runs) {
        if (rr.ok)
            std::cout << rr.label << " seed=" << rr.seed << " -> " << rr.trace_file.string()
                      << "\n";
        else
            std::cerr << rr.label << " seed=" << rr.seed << " FAILED: " << rr.error << "\n";
    }
    std::cout << "summary: " << (cfg.out_dir / "summary.json").string() << "\n";
    return res.all_failed ? kExitNumeric : kExitOk;
}

struct OracleArgs {
    std::string problem;
    std::string out = ".";
    std::size_t k = 2;
    std::string mass = "rbk";
    double lambda = 1e-3;
    double eta = 1.0;
    std::string sampler = "uniform";
    double kdpp_lambda = 1e-3;
    std::string mode = "enumerate";
    std::size_t draws = 0;
    std::uint64_t seed = 0;
};

MassMatrixKind mass_from_args(const std::string& name, double lambda, double eta) {
    if (name == "rbk") return MassMatrixKind::rbk();
    if (name == "reblock") return MassMatrixKind::reblock(lambda);
    if (name == "msgd") return MassMatrixKind::msgd(eta);
    throw ContractError("unknown mass '" + name + "'");
}

SamplerKind sampler_from_args(const std::string& name, std::size_t k, double kdpp_lambda) {
    if (name == "uniform") return SamplerKind::uniform(k);
    if (name == "kdpp" || name == "kdpp-enumerate")
        return SamplerKind::kdpp(k, kdpp_lambda, SamplerKind::KDppMode::Enumerate);
    if (name == "kdpp-eigen")
        return SamplerKind::kdpp(k, kdpp_lambda, SamplerKind::KDppMode::EigenSample);
    throw ContractError("unknown sampler '" + name + "'");
}

OracleReport oracle_from_args(const OracleArgs& args) {
    LeastSquaresProblem p = load_problem(args.problem);
    OracleOptions opts;
    if (args.mode == "enumerate") {
        opts.mode = OracleMode::Enumerate;
        const std::size_t count = binomial_capped(p.rows(), args.k, 1000000);
        if (count > 1000000)
            throw GuardError(
                "oracle: C(m,k) exceeds the enumeration guard; rerun with "
                "--mode montecarlo --draws N");
    } else if (args.mode == "montecarlo") {
        opts.mode = OracleMode::MonteCarlo;
        require(args.draws > 0, "oracle: --mode montecarlo requires --draws");
        opts.draws = args.draws;
        opts.seed = args.seed;
    } else {
        throw ContractError("oracle: unknown mode '" + args.mode + "'");
    }
    return compute_oracle(p, args.k, mass_from_args(args.mass, args.lambda, args.eta),
                          sampler_from_args(args.sampler, args.k, args.kdpp_lambda), opts);
}

int cmd_oracle(const OracleArgs& args) {
    OracleReport rep = oracle_from_args(args);
    std::filesystem::create_directories(args.out);
    const auto file = std::filesystem::path(args.out) / "oracle.json";
    save_oracle_json(rep, file);
    std::cout << "alpha=" << rep.alpha << " kappa_w=" << rep.kappa_w
              << " |r_rho|=" << nrm2(rep.r_rho) << " bias=" << rep.bias_norm
              << " V=" << rep.variance_v << "\n";
    std::cout << "wrote " << file.string() << "\n";
    return kExitOk;
}

struct VerifyArgs {
    OracleArgs oracle;
    bool inject_fault = false;
};

int cmd_verify(const VerifyArgs& args) {
    LeastSquaresProblem p = load_problem(args.oracle.problem);
    OracleReport rep = oracle_from_args(args.oracle);
    if (args.inject_fault) {
        // test hook: corrupt W_bar by 2x after the oracle computation
        for (std::size_t i = 0; i < rep.w_bar.size(); ++i) rep.w_bar.data()[i] *= 2.0;
    }
    const MassMatrixKind mass =
        mass_from_args(args.oracle.mass, args.oracle.lambda, args.oracle.eta);
    if (args.inject_fault || rep.ledger.entries.empty()) {
        if (mass.kind == MassMatrixKind::Kind::ReBlocK)
            rep.ledger = check_bounds_reblock(p, args.oracle.k, mass.lambda, rep);
        else
            rep.ledger = check_bounds_rbk(p, args.oracle.k, rep);
    }
    std::cout << "bound ledger (" << rep.ledger.entries.size() << " entries):\n";
    for (const auto& e : rep.ledger.entries)
        std::cout << "  " << (e.holds ? "PASS" : "FAIL") << "  " << e.name
                  << "  actual=" << e.actual_value << "  bound=" << e.bound_value << "\n";
    if (!rep.ledger.all_hold()) {
        std::cerr << "verification FAILED\n";
        return kExitVerifyFail;
    }
    std::cout << "all bounds hold\n";
    return kExitOk;
}

struct BenchArgs {
    std::size_t n = 10000;
    std::size_t k = 200;
    std::size_t trials = 100;
    double lambda = 1e-3;
    double eta = 0.5;
    std::string out = ".";
};

int cmd_bench(const BenchArgs& args) {
    require(args.trials >= 3, "bench: need at least 3 trials");
    Rng rng(7, /*stream=*/0xbe9cu);
    BlockSample block;
    block.a_block = DenseMatrix(args.k, args.n);
    for (std::size_t i = 0; i < block.a_block.size(); ++i)
        block.a_block.data()[i] = rng.next_gaussian();
    block.b_block = DenseVector(args.k);
    for (std::size_t i = 0; i < args.k; ++i) block.b_block[i] = rng.next_gaussian();
    DenseVector x(args.n);
    for (std::size_t i = 0; i < args.n; ++i) x[i] = rng.next_gaussian();

    std::filesystem::create_directories(args.out);
    const auto file = std::filesystem::path(args.out) / "timing.csv";
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << "solver,n,k,median_s,iqr_s\n";

    const std::vector<MassMatrixKind> masses = {
        MassMatrixKind::rbk(), MassMatrixKind::reblock(args.lambda),
        MassMatrixKind::msgd(args.eta)};
    using clock = std::chrono::steady_clock;
    for (const auto& mass : masses) {
        volatile double sink = 0.0;
        for (int w = 0; w < 2; ++w) sink = sink + apply_update(x, block, mass)[0];
        std::vector<double> times(args.trials);
        for (std::size_t t = 0; t < args.trials; ++t) {
            const auto t0 = clock::now();
            DenseVector xn = apply_update(x, block, mass);
            times[t] = std::chrono::duration<double>(clock::now() - t0).count();
            sink = sink + xn[0];
        }
        std::sort(times.begin(), times.end());
        const double median = times[args.trials / 2];
        const double iqr = times[(3 * args.trials) / 4] - times[args.trials / 4];
        out << mass.name() << "," << args.n << "," << args.k << ","
            << format_double(median) << "," << format_double(iqr) << "\n";
        std::cout << mass.name() << ": median=" << median << "s iqr=" << iqr << "s\n";
        (void)sink;
    }
    std::cout << "wrote " << file.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();
    CLI::App app{"randomized block row-access least-squares solvers"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "generate a problem bundle");
    g->add_option("--family", gen.family, "gaussian|chebyshev|isosceles|noisy|load")
        ->required();
    g->add_option("--out", gen.out, "output bundle directory")->required();
    g->add_option("--epsilon", gen.epsilon, "isosceles epsilon");
    g->add_option("--n", gen.n, "columns");
    g->add_option("--m", gen.m, "rows");
    g->add_option("--decay", gen.decay, "spectral decay exponent (0 = none)");
    g->add_option("--noise-std", gen.noise_std, "noise standard deviation");
    g->add_option("--seed", gen.seed, "generator seed");
    g->add_option("--spectrum", gen.spectrum, "gaussian spectrum: flat or poly:BETA");
    g->add_option("--from", gen.from, "source bundle for --family load");

    SolveArgs sol;
    auto* s = app.add_subcommand("solve", "run solver traces");
    s->add_option("--problem", sol.problem, "problem bundle directory");
    s->add_option("--config", sol.config, "experiment config JSON");
    s->add_option("--out", sol.out, "output directory");
    s->add_option("--solver", sol.solver, "rbk|reblock|msgd");
    s->add_option("--k", sol.k, "block size");
    s->add_option("--T", sol.total_iters, "total iterations");
    s->add_option("--tb", sol.tb, "burn-in iterations (overrides --tb-frac)");
    s->add_option("--tb-frac", sol.tb_frac, "burn-in fraction of T (default 0.5)");
    s->add_option("--seeds", sol.seeds, "comma-separated seed list");
    s->add_option("--lambda", sol.lambda, "ReBlocK regularization");
    s->add_option("--eta", sol.eta, "mSGD step size");
    s->add_option("--tune-eta", sol.tune_eta, "mSGD step-size grid, e.g. grid:1e-4..1");
    s->add_option("--record-every", sol.record_every, "metric recording stride");
    s->add_option("--sampler", sol.sampler, "uniform|kdpp|kdpp-enumerate");
    s->add_option("--kdpp-lambda", sol.kdpp_lambda, "k-DPP kernel regularization");

    OracleArgs ora;
    auto* o = app.add_subcommand("oracle", "compute the oracle report");
    o->add_option("--problem", ora.problem, "problem bundle directory")->required();
    o->add_option("--out", ora.out, "output directory for oracle.json");
    o->add_option("--k", ora.k, "block size");
    o->add_option("--mass", ora.mass, "rbk|reblock|msgd");
    o->add_option("--lambda", ora.lambda, "ReBlocK regularization");
    o->add_option("--eta", ora.eta, "mSGD step size");
    o->add_option("--sampler", ora.sampler, "uniform|kdpp-enumerate|kdpp-eigen");
    o->add_option("--kdpp-lambda", ora.kdpp_lambda, "k-DPP kernel regularization");
    o->add_option("--mode", ora.mode, "enumerate|montecarlo");
    o->add_option("--draws", ora.draws, "Monte Carlo draws");
    o->add_option("--seed", ora.seed, "Monte Carlo seed");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "verify theorem bounds; exit 1 on violation");
    v->add_option("--problem", ver.oracle.problem, "problem bundle directory")->required();
    v->add_option("--k", ver.oracle.k, "block size");
    v->add_option("--mass", ver.oracle.mass, "rbk|reblock|msgd");
    v->add_option("--lambda", ver.oracle.lambda, "ReBlocK regularization");
    v->add_option("--eta", ver.oracle.eta, "mSGD step size");
    v->add_option("--sampler", ver.oracle.sampler, "uniform|kdpp-enumerate");
    v->add_option("--kdpp-lambda", ver.oracle.kdpp_lambda, "k-DPP kernel regularization");
    v->add_flag("--inject-fault", ver.inject_fault, "corrupt W_bar by 2x (test hook)");

    BenchArgs ben;
    auto* b = app.add_subcommand("bench", "per-update timing of each mass kind");
    b->add_option("--n", ben.n, "columns");
    b->add_option("--k", ben.k, "block size");
    b->add_option("--trials", ben.trials, "timed trials");
    b->add_option("--lambda", ben.lambda, "ReBlocK regularization");
    b->add_option("--eta", ben.eta, "mSGD step size");
    b->add_option("--out", ben.out, "output directory for timing.csv");

    try {
        app.parse(argc, argv);
        if (g->parsed()) return cmd_generate(gen);
        if (s->parsed()) return cmd_solve(sol);
        if (o->parsed()) return cmd_oracle(ora);
        if (v->parsed()) return cmd_verify(ver);
        if (b->parsed()) return cmd_bench(ben);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const GuardError& e) {
        std::cerr << "guard: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
}
