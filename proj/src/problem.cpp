#include "rowsolve/problem.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "rowsolve/csvio.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"

namespace rowsolve {

using nlohmann::json;

void LeastSquaresProblem::validate() const {
    require(b.size() == a.rows(), "problem: b length must equal A rows");
    require(a.all_finite() && b.all_finite(), "problem: non-finite entries");
    if (x_star) {
        require(x_star->size() == a.cols(), "problem: x_star length must equal A cols");
        DenseVector res = residual(a, *x_star, b);
        DenseVector normal = matvec_t(a, res);
        const double tol = 1e-8 * frobenius_norm(a) * std::max(nrm2(b), 1.0);
        if (nrm2(normal) > tol)
            throw ContractError("problem: x_star violates the normal equations");
        if (residual_norm) {
            const double actual = nrm2(res);
            if (std::fabs(actual - *residual_norm) > 1e-10 * std::max(1.0, actual))
                throw ContractError("problem: stored residual_norm is inconsistent");
        }
    }
}

DenseMatrix GaussianProblem::l_n() const {
    const std::size_t n = dim();
    DenseMatrix ln(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ln(i, j) = l_factor(i, j);
    return ln;
}

DenseMatrix random_orthonormal(std::size_t n, Rng& rng) {
    DenseMatrix g(n, n);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.next_gaussian();
    // Gram-Schmidt on columns with the diagonal sign fixed positive gives a
    // Haar-distributed orthonormal factor.
    for (std::size_t j = 0; j < n; ++j) {
        for (int round = 0; round < 2; ++round)
            for (std::size_t l = 0; l < j; ++l) {
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += g(i, l) * g(i, j);
                for (std::size_t i = 0; i < n; ++i) g(i, j) -= proj * g(i, l);
            }
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm += g(i, j) * g(i, j);
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) throw NumericError("random_orthonormal: degenerate draw");
        double sign = g(j, j) >= 0.0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) g(i, j) *= sign / nrm;
    }
    return g;
}

GaussianProblem gen_gaussian(std::size_t n, const DenseVector& spectrum,
                             const DenseVector& planted_x, double noise_std,
                             std::uint64_t seed) {
    require(n >= 1, "gen_gaussian: n must be >= 1");
    require(spectrum.size() == n, "gen_gaussian: spectrum length must equal n");
    require(planted_x.size() == n, "gen_gaussian: planted_x length must equal n");
    require(noise_std >= 0.0, "gen_gaussian: noise_std must be >= 0");
    for (std::size_t i = 0; i < n; ++i) {
        require(spectrum[i] > 0.0, "gen_gaussian: singular values must be positive");
        if (i) require(spectrum[i] <= spectrum[i - 1], "gen_gaussian: spectrum must descend");
    }
    Rng rng(seed, /*stream=*/0x9a55u);
    DenseMatrix u = random_orthonormal(n, rng);
    DenseMatrix v = random_orthonormal(n, rng);
    DenseMatrix ln(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < n; ++l) s += u(i, l) * spectrum[l] * v(j, l);
            ln(i, j) = s;
        }

    GaussianProblem p;
    p.l_factor = DenseMatrix(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) p.l_factor(i, j) = ln(i, j);
    // bottom row: (L_n^T x*)^T, noise_std
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += ln(i, j) * planted_x[i];
        p.l_factor(n, j) = s;
    }
    p.l_factor(n, n) = noise_std;
    p.x_star = planted_x;
    p.noise_std = noise_std;
    p.meta["family"] = "gaussian";
    p.meta["seed"] = std::to_string(seed);
    return p;
}

BlockSample sample_gaussian_block(const GaussianProblem& p, std::size_t k, Rng& rng) {
    require(k >= 1, "sample_gaussian_block: k must be >= 1");
    const std::size_t n = p.dim();
    BlockSample s;
    s.a_block = DenseMatrix(k, n);
    s.b_block = DenseVector(k);
    DenseVector z(n + 1);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t i = 0; i < n + 1; ++i) z[i] = rng.next_gaussian();
        // row = (L z)^T
        for (std::size_t i = 0; i < n; ++i)
            s.a_block(r, i) = serial::dot(p.l_factor.row(i), z.data(), n);
        s.b_block[r] = serial::dot(p.l_factor.row(n), z.data(), n + 1);
    }
    return s;
}

LeastSquaresProblem gen_chebyshev(const ChebyshevSpec& spec) {
    require(spec.n >= 1 && spec.m >= spec.n, "gen_chebyshev: need m >= n >= 1");
    require(spec.exponent > 0.0, "gen_chebyshev: exponent must be > 0");
    require(spec.noise_std >= 0.0, "gen_chebyshev: noise_std must be >= 0");
    const std::size_t m = spec.m, n = spec.n;
    Rng rng(spec.seed, /*stream=*/0xc4ebu);

    // T(i, l) = T_{l+1}(v_i) for l = 0..n-1 via the three-term recurrence.
    DenseMatrix cheb(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double s = (m == 1) ? -1.0
                                  : -1.0 + 2.0 * static_cast<double>(i) /
                                               static_cast<double>(m - 1);
        double tprev = 1.0;  // T_0
        double tcur = s;     // T_1
        for (std::size_t l = 0; l < n; ++l) {
            cheb(i, l) = tcur;
            const double tnext = 2.0 * s * tcur - tprev;
            tprev = tcur;
            tcur = tnext;
        }
    }

    LeastSquaresProblem p;
    if (spec.c_kind == ChebyshevSpec::CKind::Identity) {
        p.a = cheb;
    } else {
        DenseMatrix u = random_orthonormal(n, rng);
        DenseMatrix v = random_orthonormal(n, rng);
        DenseMatrix c(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < n; ++l)
                    s += u(i, l) * std::pow(static_cast<double>(l + 1), -spec.exponent) *
                         v(j, l);
                c(i, j) = s;
            }
        // A_ij = sum_l C_jl T_l(v_i)  =>  A = cheb * C^T
        p.a = DenseMatrix(m, n);
        const std::ptrdiff_t mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * n >= (1u << 16))
        for (std::ptrdiff_t i = 0; i < mm; ++i)
            for (std::size_t j = 0; j < n; ++j)
                p.a(i, j) = serial::dot(cheb.row(i), c.row(j), n);
    }

    DenseVector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rng.next_gaussian();
    p.b = matvec(p.a, y);
    for (std::size_t i = 0; i < m; ++i) p.b[i] += spec.noise_std * rng.next_gaussian();

    p.x_star = qr_lstsq(p.a, p.b);
    p.residual_norm = nrm2(residual(p.a, *p.x_star, p.b));
    p.meta["family"] = "chebyshev";
    p.meta["n"] = std::to_string(n);
    p.meta["m"] = std::to_string(m);
    p.meta["c_kind"] =
        spec.c_kind == ChebyshevSpec::CKind::Identity ? "identity" : "decaying";
    p.meta["exponent"] = format_double(spec.exponent);
    p.meta["noise_std"] = format_double(spec.noise_std);
    p.meta["seed"] = std::to_string(spec.seed);
    return p;
}

LeastSquaresProblem gen_isosceles(double epsilon) {
    require(epsilon > 0.0 && epsilon <= 1.0, "gen_isosceles: need 0 < epsilon <= 1");
    const double e2 = epsilon * epsilon;
    LeastSquaresProblem p;
    p.a = DenseMatrix::from_rows({{0.0, 1.0}, {1.0, e2}, {1.0, -e2}});
    p.b = DenseVector{0.0, 1.0 + epsilon, 1.0 - epsilon};
    const double e3 = e2 * epsilon;
    const double e4 = e2 * e2;
    p.x_star = DenseVector{1.0, 2.0 * e3 / (1.0 + 2.0 * e4)};
    p.residual_norm = nrm2(residual(p.a, *p.x_star, p.b));
    p.meta["family"] = "isosceles";
    p.meta["epsilon"] = format_double(epsilon);
    return p;
}

LeastSquaresProblem gen_noisy(const DenseMatrix& a, const DenseVector& planted_x,
                              double noise_std, std::uint64_t seed) {
    require(planted_x.size() == a.cols(), "gen_noisy: dimension mismatch");
    require(noise_std >= 0.0, "gen_noisy: noise_std must be >= 0");
    Rng rng(seed, /*stream=*/0x4015u);
    LeastSquaresProblem p;
    p.a = a;
    p.b = matvec(a, planted_x);
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] += noise_std * rng.next_gaussian();
    p.x_star = qr_lstsq(p.a, p.b);
    p.residual_norm = nrm2(residual(p.a, *p.x_star, p.b));
    p.meta["family"] = "noisy";
    p.meta["noise_std"] = format_double(noise_std);
    p.meta["seed"] = std::to_string(seed);
    return p;
}

namespace {

json meta_to_json(const std::map<std::string, std::string>& meta) {
    json j = json::object();
    for (const auto& [k, v] : meta) j[k] = v;
    return j;
}

std::map<std::string, std::string> meta_from_json(const json& j) {
    std::map<std::string, std::string> meta;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.value().is_string()) meta[it.key()] = it.value().get<std::string>();
    return meta;
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open: " + file.string());
    json j;
    in >> j;
    return j;
}

}  // namespace

void save_problem(const LeastSquaresProblem& p, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir / "A.csv", p.a);
    write_vector_csv(dir / "b.csv", p.b);
    json j;
    j["kind"] = "finite";
    j["meta"] = meta_to_json(p.meta);
    if (p.x_star) {
        json xs = json::array();
        for (std::size_t i = 0; i < p.x_star->size(); ++i) xs.push_back((*p.x_star)[i]);
        j["x_star"] = xs;
    }
    if (p.residual_norm) j["residual_norm"] = *p.residual_norm;
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot open for writing: " + (dir / "meta.json").string());
    out << j.dump(2) << "\n";
}

void save_problem(const GaussianProblem& p, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir / "L.csv", p.l_factor);
    json j;
    j["kind"] = "gaussian";
    j["meta"] = meta_to_json(p.meta);
    j["noise_std"] = p.noise_std;
    json xs = json::array();
    for (std::size_t i = 0; i < p.x_star.size(); ++i) xs.push_back(p.x_star[i]);
    j["x_star"] = xs;
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError("cannot open for writing: " + (dir / "meta.json").string());
    out << j.dump(2) << "\n";
}

LeastSquaresProblem load_problem(const std::filesystem::path& dir) {
    ProblemBundle b = load_bundle(dir);
    if (!b.finite) throw IoError("bundle at " + dir.string() + " is not a finite problem");
    return std::move(*b.finite);
}

ProblemBundle load_bundle(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    if (!std::filesystem::exists(meta_path)) throw IoError("missing file: " + meta_path.string());
    json j = read_json_file(meta_path);
    const std::string kind = j.value("kind", "finite");
    ProblemBundle bundle;
    if (kind == "gaussian") {
        GaussianProblem p;
        const auto lpath = dir / "L.csv";
        if (!std::filesystem::exists(lpath)) throw IoError("missing file: " + lpath.string());
        p.l_factor = read_matrix_csv(lpath);
        require(p.l_factor.rows() == p.l_factor.cols() && p.l_factor.rows() >= 2,
                "gaussian bundle: L must be (n+1) x (n+1)");
        p.noise_std = j.value("noise_std", 0.0);
        if (!j.contains("x_star")) throw IoError("gaussian bundle missing x_star in meta.json");
        p.x_star.resize(j["x_star"].size());
        for (std::size_t i = 0; i < p.x_star.size(); ++i) p.x_star[i] = j["x_star"][i];
        require(p.x_star.size() + 1 == p.l_factor.rows(), "gaussian bundle: x_star length");
        if (j.contains("meta")) p.meta = meta_from_json(j["meta"]);
        bundle.gaussian = std::move(p);
        return bundle;
    }
    LeastSquaresProblem p;
    const auto apath = dir / "A.csv";
    const auto bpath = dir / "b.csv";
    if (!std::filesystem::exists(apath)) throw IoError("missing file: " + apath.string());
    if (!std::filesystem::exists(bpath)) throw IoError("missing file: " + bpath.string());
    p.a = read_matrix_csv(apath);
    p.b = read_vector_csv(bpath);
    if (j.contains("x_star")) {
        DenseVector xs(j["x_star"].size());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = j["x_star"][i];
        p.x_star = std::move(xs);
    }
    if (j.contains("residual_norm")) p.residual_norm = j["residual_norm"].get<double>();
    if (j.contains("meta")) p.meta = meta_from_json(j["meta"]);
    p.validate();
    bundle.finite = std::move(p);
    return bundle;
}

}  // namespace rowsolve
