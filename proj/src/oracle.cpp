#include "rowsolve/oracle.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "rowsolve/csvio.hpp"
#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"
#include "rowsolve/stats.hpp"

namespace rowsolve {

using nlohmann::json;

void BoundLedger::add_le(const std::string& name, double actual, double bound, double slack) {
    BoundEntry e{name, bound, actual, false};
    e.holds = std::isfinite(actual) && (actual <= bound + slack);
    entries.push_back(std::move(e));
}

void BoundLedger::add_ge(const std::string& name, double actual, double bound, double slack) {
    BoundEntry e{name, bound, actual, false};
    e.holds = std::isfinite(actual) && (actual >= bound - slack);
    entries.push_back(std::move(e));
}

bool BoundLedger::all_hold() const {
    for (const auto& e : entries)
        if (!e.holds) return false;
    return true;
}

const BoundEntry* BoundLedger::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

DenseMatrix mass_matrix(const DenseMatrix& a_block, const MassMatrixKind& mass) {
    const std::size_t k = a_block.rows();
    switch (mass.kind) {
        case MassMatrixKind::Kind::Rbk: {
            // (A_S A_S^T)^+ from the SVD of A_S; Jacobi keeps tiny singular
            // values accurate, which matters for nearly singular blocks.
            SvdResult s = svd(a_block);
            const double tol = (mass.rank_tol > 0.0 ? mass.rank_tol
                                                    : default_rank_tol(k, a_block.cols())) *
                               (s.singular_values.size() ? s.singular_values[0] : 0.0);
            DenseMatrix m(k, k);
            const std::size_t nv = std::min(k, a_block.cols());
            for (std::size_t j = 0; j < nv; ++j) {
                const double sj = s.singular_values[j];
                if (sj <= tol || sj == 0.0) continue;
                const double w = 1.0 / (sj * sj);
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t l = 0; l < k; ++l) m(i, l) += w * s.u(i, j) * s.u(l, j);
            }
            return m;
        }
        case MassMatrixKind::Kind::ReBlocK: {
            DenseMatrix g = gram_aat(a_block);
            const double shift = mass.lambda * static_cast<double>(k);
            for (std::size_t i = 0; i < k; ++i) g(i, i) += shift;
            DenseMatrix l = cholesky_factor(g);
            DenseMatrix inv(k, k);
            DenseVector col(k);
            for (std::size_t j = 0; j < k; ++j) {
                col.fill(0.0);
                col[j] = 1.0;
                forward_subst(l, col);
                backward_subst_lt(l, col);
                for (std::size_t i = 0; i < k; ++i) inv(i, j) = col[i];
            }
            // symmetrize away the last rounding
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = i + 1; j < k; ++j) {
                    const double v = 0.5 * (inv(i, j) + inv(j, i));
                    inv(i, j) = v;
                    inv(j, i) = v;
                }
            return inv;
        }
        case MassMatrixKind::Kind::MSgd: {
            DenseMatrix m(k, k);
            const double v = mass.step_size / static_cast<double>(k);
            for (std::size_t i = 0; i < k; ++i) m(i, i) = v;
            return m;
        }
    }
    throw ContractError("mass_matrix: unknown kind");
}

SubsetLaw enumerable_law(const LeastSquaresProblem& p, std::size_t k,
                         const SamplerKind& sampler) {
    switch (sampler.family) {
        case SamplerKind::Family::UniformSubsets:
            return uniform_law(p.rows(), k);
        case SamplerKind::Family::KDpp:
            return kdpp_probabilities_enumerate(p, k, sampler.lambda);
        case SamplerKind::Family::GaussianStream:
            throw ContractError("enumerable_law: streaming law cannot be enumerated");
    }
    throw ContractError("enumerable_law: unknown sampler");
}

std::pair<DenseMatrix, DenseMatrix> enumerate_wbar_pbar(const LeastSquaresProblem& p,
                                                        std::size_t k,
                                                        const MassMatrixKind& mass,
                                                        const SamplerKind& sampler) {
    const SubsetLaw law = enumerable_law(p, k, sampler);
    const std::size_t m = p.rows(), n = p.cols();
    const std::size_t nsub = law.subsets.size();

    std::vector<KahanSum> w_acc(m * m), p_acc(n * n);
#if defined(_OPENMP)
#pragma omp parallel
    {
        std::vector<KahanSum> w_loc(m * m), p_loc(n * n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(nsub); ++si) {
            const auto& subset = law.subsets[si];
            const double prob = law.probs[si];
            BlockSample blk = extract_block(p, subset);
            DenseMatrix mm = mass_matrix(blk.a_block, mass);
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    w_loc[subset[i] * m + subset[j]].add(prob * mm(i, j));
            DenseMatrix t = matmul(mm, blk.a_block);        // k x n
            DenseMatrix ps = matmul_tn(blk.a_block, t);     // n x n
            for (std::size_t i = 0; i < n * n; ++i) p_loc[i].add(prob * ps.data()[i]);
        }
        // merge partials in thread order: stable to ~1 ulp across thread counts
#pragma omp critical(wbar_merge)
        {
            for (std::size_t i = 0; i < m * m; ++i) w_acc[i].add(w_loc[i].sum);
            for (std::size_t i = 0; i < n * n; ++i) p_acc[i].add(p_loc[i].sum);
        }
    }
#else
    for (std::size_t si = 0; si < nsub; ++si) {
        const auto& subset = law.subsets[si];
        const double prob = law.probs[si];
        BlockSample blk = extract_block(p, subset);
        DenseMatrix mm = mass_matrix(blk.a_block, mass);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                w_acc[subset[i] * m + subset[j]].add(prob * mm(i, j));
        DenseMatrix t = matmul(mm, blk.a_block);
        DenseMatrix ps = matmul_tn(blk.a_block, t);
        for (std::size_t i = 0; i < n * n; ++i) p_acc[i].add(prob * ps.data()[i]);
    }
#endif

    DenseMatrix w_bar(m, m), p_bar(n, n);
    for (std::size_t i = 0; i < m * m; ++i) w_bar.data()[i] = w_acc[i].sum;
    for (std::size_t i = 0; i < n * n; ++i) p_bar.data()[i] = p_acc[i].sum;

    // internal consistency: P_bar must equal A^T W_bar A
    DenseMatrix awa = matmul_tn(p.a, matmul(w_bar, p.a));
    double diff = 0.0;
    for (std::size_t i = 0; i < n * n; ++i)
        diff = std::max(diff, std::fabs(awa.data()[i] - p_bar.data()[i]));
    if (diff > 1e-10 * std::max(1.0, max_abs(p_bar)))
        throw NumericError("enumerate_wbar_pbar: P_bar != A^T W_bar A beyond tolerance");
    return {std::move(w_bar), std::move(p_bar)};
}

namespace {

DenseMatrix projection_p_of_block(const DenseMatrix& a_block, const MassMatrixKind& mass) {
    DenseMatrix mm = mass_matrix(a_block, mass);
    DenseMatrix t = matmul(mm, a_block);
    return matmul_tn(a_block, t);
}

}  // namespace

McEstimate montecarlo_wbar_pbar(const LeastSquaresProblem& p, std::size_t k,
                                const MassMatrixKind& mass, const SamplerKind& sampler,
                                std::size_t draws, std::uint64_t seed) {
    require(draws >= 1000, "montecarlo_wbar_pbar: need draws >= 1000");
    BlockSampler bs(p, sampler);
    Rng rng(seed, /*stream=*/0x3cc0u);
    MatrixMoments pmom(p.cols(), p.cols());
    MatrixMoments wmom(p.rows(), p.rows());
    DenseMatrix wsample(p.rows(), p.rows());
    for (std::size_t d = 0; d < draws; ++d) {
        BlockSample blk = bs.next(rng);
        pmom.update(projection_p_of_block(blk.a_block, mass));
        DenseMatrix mm = mass_matrix(blk.a_block, mass);
        wsample = DenseMatrix(p.rows(), p.rows());
        const auto& idx = *blk.indices;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) wsample(idx[i], idx[j]) = mm(i, j);
        wmom.update(wsample);
    }
    McEstimate est;
    est.p_bar_mean = pmom.mean();
    est.p_bar_se = pmom.std_error();
    est.w_bar_mean = wmom.mean();
    est.w_bar_se = wmom.std_error();
    est.has_w_bar = true;
    est.draws = draws;
    return est;
}

McEstimate montecarlo_wbar_pbar(const GaussianProblem& p, std::size_t k,
                                const MassMatrixKind& mass, std::size_t draws,
                                std::uint64_t seed) {
    require(draws >= 1000, "montecarlo_wbar_pbar: need draws >= 1000");
    Rng rng(seed, /*stream=*/0x3cc1u);
    MatrixMoments pmom(p.dim(), p.dim());
    for (std::size_t d = 0; d < draws; ++d) {
        BlockSample blk = sample_gaussian_block(p, k, rng);
        pmom.update(projection_p_of_block(blk.a_block, mass));
    }
    McEstimate est;
    est.p_bar_mean = pmom.mean();
    est.p_bar_se = pmom.std_error();
    est.has_w_bar = false;
    est.draws = draws;
    return est;
}

std::pair<DenseVector, DenseVector> weighted_solution(const LeastSquaresProblem& p,
                                                      const DenseMatrix& w_bar) {
    require(w_bar.rows() == p.rows() && w_bar.cols() == p.rows(),
            "weighted_solution: W_bar must be m x m");
    DenseMatrix s = psd_sqrt(w_bar);
    DenseMatrix sa = matmul(s, p.a);
    DenseVector sb = matvec(s, p.b);
    DenseVector x_rho = qr_lstsq(sa, sb);
    DenseVector r_rho = residual(p.a, x_rho, p.b);
    return {std::move(x_rho), std::move(r_rho)};
}

double variance_v(const LeastSquaresProblem& p, const SubsetLaw& law,
                  const MassMatrixKind& mass, const DenseVector& r_rho) {
    require(r_rho.size() == p.rows(), "variance_v: residual length mismatch");
    KahanSum acc;
    const std::size_t k = law.k;
    DenseVector r_s(k);
    for (std::size_t si = 0; si < law.subsets.size(); ++si) {
        const auto& subset = law.subsets[si];
        BlockSample blk = extract_block(p, subset);
        for (std::size_t i = 0; i < k; ++i) r_s[i] = r_rho[subset[i]];
        DenseVector term;
        switch (mass.kind) {
            case MassMatrixKind::Kind::Rbk:
                term = (mass.rank_tol > 0.0)
                           ? pseudoinverse_apply(blk.a_block, r_s, mass.rank_tol)
                           : qr_lstsq(blk.a_block, r_s);
                break;
            case MassMatrixKind::Kind::ReBlocK: {
                DenseMatrix g = gram_aat(blk.a_block);
                const double shift = mass.lambda * static_cast<double>(k);
                for (std::size_t i = 0; i < k; ++i) g(i, i) += shift;
                term = matvec_t(blk.a_block, cholesky_solve_spd(g, r_s));
                break;
            }
            case MassMatrixKind::Kind::MSgd: {
                term = matvec_t(blk.a_block, r_s);
                const double scale = mass.step_size / static_cast<double>(k);
                for (std::size_t i = 0; i < term.size(); ++i) term[i] *= scale;
                break;
            }
        }
        const double sq = dot(term, term);
        acc.add(law.probs[si] * sq);
    }
    return acc.sum;
}

double alpha_from_pbar(const LeastSquaresProblem& p, const DenseMatrix& p_bar) {
    DenseVector sig = singular_values(p.a);
    const std::size_t rank = numerical_rank(sig, default_rank_tol(p.rows(), p.cols()));
    if (rank == 0) return 0.0;
    SymEig e = eigh(p_bar);  // descending
    return e.values[rank - 1];
}

double kappa_of(const DenseMatrix& w_bar) {
    SymEig e = eigh(w_bar);
    const std::size_t n = w_bar.rows();
    const double lmax = e.values[0];
    const double lmin = e.values[n - 1];
    if (lmin <= 1e-14 * std::max(lmax, 0.0))
        return std::numeric_limits<double>::infinity();
    return lmax / lmin;
}

namespace {

struct BoundIngredients {
    double max_row_norm_sq = 0.0;
    double max_block_pinv_sq = 0.0;  // max_S ||A_S^+||^2 over the uniform law
    double a_pinv_norm = 0.0;        // ||A^+||
    double kappa_a = 0.0;
    double r_norm = 0.0;  // ||b - A x*||
};

BoundIngredients bound_ingredients(const LeastSquaresProblem& p, std::size_t k) {
    BoundIngredients ing;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const double ns = serial::dot(p.a.row(i), p.a.row(i), p.cols());
        ing.max_row_norm_sq = std::max(ing.max_row_norm_sq, ns);
    }
    const double rank_tol = default_rank_tol(p.rows(), p.cols());
    DenseVector sig = singular_values(p.a);
    const double smin = min_nonzero_singular_value(p.a, rank_tol);
    ing.a_pinv_norm = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    ing.kappa_a = smin > 0.0 ? sig[0] / smin : std::numeric_limits<double>::infinity();

    SubsetLaw law = uniform_law(p.rows(), k);
    for (const auto& subset : law.subsets) {
        BlockSample blk = extract_block(p, subset);
        const double bs = min_nonzero_singular_value(blk.a_block, rank_tol);
        if (bs > 0.0)
            ing.max_block_pinv_sq = std::max(ing.max_block_pinv_sq, 1.0 / (bs * bs));
        else
            ing.max_block_pinv_sq = std::numeric_limits<double>::infinity();
    }

    DenseVector x_star = p.x_star ? *p.x_star : qr_lstsq(p.a, p.b);
    ing.r_norm = nrm2(residual(p.a, x_star, p.b));
    return ing;
}

void add_consistency_entries(BoundLedger& ledger, const LeastSquaresProblem& p,
                             const OracleReport& rep) {
    // normal equations of the weighted problem: A^T W_bar r_rho = 0
    DenseVector wr = matvec(rep.w_bar, rep.r_rho);
    const double normal = nrm2(matvec_t(p.a, wr));
    const double scale =
        std::max(1.0, frobenius_norm(p.a) * frobenius_norm(rep.w_bar) * nrm2(p.b));
    ledger.add_le("normal_equations", normal, 0.0, 1e-9 * scale);

    // P_bar = A^T W_bar A
    DenseMatrix awa = matmul_tn(p.a, matmul(rep.w_bar, p.a));
    double diff = 0.0;
    for (std::size_t i = 0; i < awa.size(); ++i)
        diff = std::max(diff, std::fabs(awa.data()[i] - rep.p_bar.data()[i]));
    ledger.add_le("pbar_equals_atwa", diff, 0.0, 1e-10 * std::max(1.0, max_abs(rep.p_bar)));

    // 0 <= P_bar <= I
    SymEig e = eigh(rep.p_bar);
    const std::size_t n = rep.p_bar.rows();
    ledger.add_ge("pbar_psd", e.values[n - 1], 0.0, 1e-9);
    ledger.add_le("pbar_below_identity", e.values[0], 1.0, 1e-9);
}

}  // namespace

BoundLedger check_bounds_rbk(const LeastSquaresProblem& p, std::size_t k,
                             const OracleReport& rep) {
    BoundIngredients ing = bound_ingredients(p, k);
    BoundLedger ledger;
    add_consistency_entries(ledger, p, rep);
    const double slack = 1e-8;
    const double kw_bound =
        static_cast<double>(k) * ing.max_row_norm_sq * ing.max_block_pinv_sq;
    ledger.add_le("rbk_kappa_w", rep.kappa_w, kw_bound, slack * std::max(1.0, kw_bound));
    const double rr_bound = std::sqrt(rep.kappa_w) * ing.r_norm;
    ledger.add_le("rbk_weighted_residual", nrm2(rep.r_rho), rr_bound,
                  slack * std::max(1.0, rr_bound));
    const double bias_bound =
        std::sqrt(std::max(rep.kappa_w - 1.0, 0.0)) * ing.a_pinv_norm * ing.r_norm;
    ledger.add_le("rbk_bias", rep.bias_norm, bias_bound, slack * std::max(1.0, bias_bound));
    const double v_bound = ing.max_block_pinv_sq * rep.kappa_w * static_cast<double>(k) *
                           ing.r_norm * ing.r_norm / static_cast<double>(p.rows());
    ledger.add_le("rbk_variance", rep.variance_v, v_bound, slack * std::max(1.0, v_bound));
    return ledger;
}

BoundLedger check_bounds_reblock(const LeastSquaresProblem& p, std::size_t k,
                                 double lambda, const OracleReport& rep) {
    BoundIngredients ing = bound_ingredients(p, k);
    BoundLedger ledger;
    add_consistency_entries(ledger, p, rep);
    const double slack = 1e-8;
    const double kw_bound = 1.0 + ing.max_row_norm_sq / lambda;
    ledger.add_le("reblock_kappa_w", rep.kappa_w, kw_bound, slack * std::max(1.0, kw_bound));
    const double rr_bound = std::sqrt(rep.kappa_w) * ing.r_norm;
    ledger.add_le("reblock_weighted_residual", nrm2(rep.r_rho), rr_bound,
                  slack * std::max(1.0, rr_bound));
    const double bias_bound =
        std::sqrt(std::max(rep.kappa_w - 1.0, 0.0)) * ing.a_pinv_norm * ing.r_norm;
    ledger.add_le("reblock_bias", rep.bias_norm, bias_bound,
                  slack * std::max(1.0, bias_bound));
    const double bias_loose = ing.kappa_a * ing.r_norm / std::sqrt(lambda);
    ledger.add_le("reblock_bias_loose", rep.bias_norm, bias_loose,
                  slack * std::max(1.0, bias_loose));
    const double v_bound =
        rep.kappa_w * ing.r_norm * ing.r_norm / (4.0 * lambda * static_cast<double>(p.rows()));
    ledger.add_le("reblock_variance", rep.variance_v, v_bound,
                  slack * std::max(1.0, v_bound));
    return ledger;
}

double gaussian_alpha_bound(const DenseVector& spectrum, std::size_t k) {
    const std::size_t n = spectrum.size();
    require(n >= 1 && k >= 1, "gaussian_alpha_bound: empty spectrum or k = 0");
    double fro_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) fro_sq += spectrum[i] * spectrum[i];
    const double smin_sq = spectrum[n - 1] * spectrum[n - 1];
    double best = static_cast<double>(k) * smin_sq / fro_sq;
    for (std::size_t ell = 2; ell < k; ++ell) {
        // sum over sigma_i^2 for i >= k - ell - 1 (1-based, clamped at 1)
        std::size_t start = (k > ell + 1) ? k - ell - 1 : 1;
        if (start < 1) start = 1;
        double tail = 0.0;
        for (std::size_t i = start; i <= n; ++i) tail += spectrum[i - 1] * spectrum[i - 1];
        if (tail <= 0.0) continue;
        best = std::max(best, static_cast<double>(ell - 1) * smin_sq / tail);
    }
    return best;
}

BoundLedger check_gaussian_identity(const GaussianProblem& gp, std::size_t k,
                                    std::size_t draws, std::uint64_t seed) {
    require(draws >= 1000, "check_gaussian_identity: need draws >= 1000");
    if (k < 6) throw ContractError("check_gaussian_identity: hypothesis k >= 6 fails");
    const std::size_t n = gp.dim();
    DenseMatrix ln = gp.l_n();
    DenseVector spectrum = singular_values(ln);
    const std::size_t rank = numerical_rank(spectrum, default_rank_tol(n, n));
    if (rank < 2 * k)
        throw ContractError("check_gaussian_identity: hypothesis rank(L_n) >= 2k fails");

    Rng rng(seed, /*stream=*/0x6a05u);
    VectorMoments term_mom(n);
    RunningMoments vsq;
    MatrixMoments pmom(n, n);
    const MassMatrixKind rbk = MassMatrixKind::rbk();
    for (std::size_t d = 0; d < draws; ++d) {
        BlockSample blk = sample_gaussian_block(gp, k, rng);
        // additive term at x*: A_S^+ (b_S - A_S x*)
        DenseVector rs = residual(blk.a_block, gp.x_star, blk.b_block);
        DenseVector term = qr_lstsq(blk.a_block, rs);
        term_mom.update(term);
        vsq.update(dot(term, term));
        pmom.update(projection_p_of_block(blk.a_block, rbk));
    }

    BoundLedger ledger;
    ledger.add_le("gauss_zero_mean_term", nrm2(term_mom.mean()),
                  4.0 * term_mom.combined_std_error(), 0.0);

    const double sigma_2k = spectrum[2 * k - 1];
    const double resid_second_moment = gp.noise_std * gp.noise_std;
    const double v_bound = 200.0 / (sigma_2k * sigma_2k) * resid_second_moment;
    ledger.add_le("gauss_variance", vsq.mean, v_bound, 4.0 * vsq.std_error());

    const double bound = gaussian_alpha_bound(spectrum, k);
    SymEig e = eigh(pmom.mean());
    const double alpha_mc = e.values[rank - 1];
    const double sigma_alpha = frobenius_norm(pmom.std_error());
    ledger.add_ge("gauss_alpha", alpha_mc, bound, 3.0 * sigma_alpha);
    return ledger;
}

DenseMatrix dpp_wbar_closed_form(const LeastSquaresProblem& p, std::size_t k, double lambda) {
    require(lambda > 0.0, "dpp_wbar_closed_form: lambda must be > 0");
    require(p.rows() <= 5000, "dpp_wbar_closed_form: m exceeds the dense SVD cap");
    const std::size_t m = p.rows();
    SvdResult s = svd(p.a);
    const std::size_t nr = numerical_rank(s.singular_values,
                                          default_rank_tol(p.rows(), p.cols()));
    const double shift = lambda * static_cast<double>(k);
    DenseVector q(m, shift);
    for (std::size_t i = 0; i < nr; ++i)
        q[i] = s.singular_values[i] * s.singular_values[i] + shift;
    ElemSymPolys esp = elem_sym(q, k);
    const double pk = esp.values[k];
    DenseMatrix w(m, m);
    for (std::size_t l = 0; l < m; ++l) {
        const double d = esp.leave_one_out[l] / pk;
        for (std::size_t i = 0; i < m; ++i) {
            const double c = d * s.u(i, l);
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) w(i, j) += c * s.u(j, l);
        }
    }
    return w;
}

DppAlphaBound dpp_alpha_bound(const LeastSquaresProblem& p, std::size_t k, double lambda,
                              std::size_t ell) {
    require(ell >= 1 && ell < k, "dpp_alpha_bound: need 1 <= ell < k");
    DenseVector sig = singular_values(p.a);
    const std::size_t nr = numerical_rank(sig, default_rank_tol(p.rows(), p.cols()));
    require(nr >= 1, "dpp_alpha_bound: zero matrix");
    const double smin_sq = sig[nr - 1] * sig[nr - 1];
    DppAlphaBound out;
    for (std::size_t j = ell + 1; j <= nr; ++j)
        out.kappa_ell_sq += sig[j - 1] * sig[j - 1] / smin_sq;
    for (std::size_t j = 1; j <= nr; ++j) out.kappa_dem_sq += sig[j - 1] * sig[j - 1] / smin_sq;
    const double kl = static_cast<double>(k - ell);
    const double mterm = static_cast<double>(p.rows() + k - 2 * ell) * lambda *
                         static_cast<double>(k) / smin_sq;
    out.bound = kl / (kl + out.kappa_ell_sq + mterm);
    return out;
}

OracleReport compute_oracle(const LeastSquaresProblem& p, std::size_t k,
                            const MassMatrixKind& mass, const SamplerKind& sampler,
                            const OracleOptions& opts) {
    OracleReport rep;
    rep.mode = opts.mode;
    if (opts.mode == OracleMode::Enumerate) {
        auto [w_bar, p_bar] = enumerate_wbar_pbar(p, k, mass, sampler);
        rep.w_bar = std::move(w_bar);
        rep.p_bar = std::move(p_bar);
    } else {
        require(opts.draws > 0, "compute_oracle: MonteCarlo mode requires draws > 0");
        McEstimate est = montecarlo_wbar_pbar(p, k, mass, sampler, opts.draws, opts.seed);
        rep.w_bar = est.w_bar_mean;
        rep.p_bar = est.p_bar_mean;
        rep.draws = est.draws;
        rep.max_std_error = std::max(max_abs(est.p_bar_se), max_abs(est.w_bar_se));
    }
    auto [x_rho, r_rho] = weighted_solution(p, rep.w_bar);
    rep.x_rho = std::move(x_rho);
    rep.r_rho = std::move(r_rho);
    rep.alpha = alpha_from_pbar(p, rep.p_bar);
    rep.kappa_w = kappa_of(rep.w_bar);

    if (opts.mode == OracleMode::Enumerate) {
        const SubsetLaw law = enumerable_law(p, k, sampler);
        rep.variance_v = variance_v(p, law, mass, rep.r_rho);
    } else {
        // Monte Carlo V at the estimated x_rho
        BlockSampler bs(p, sampler);
        Rng rng(opts.seed, /*stream=*/0x77aau);
        RunningMoments vm;
        for (std::size_t d = 0; d < opts.draws; ++d) {
            BlockSample blk = bs.next(rng);
            DenseVector rs(k);
            const auto& idx = *blk.indices;
            for (std::size_t i = 0; i < k; ++i) rs[i] = rep.r_rho[idx[i]];
            DenseVector term;
            if (mass.kind == MassMatrixKind::Kind::Rbk)
                term = qr_lstsq(blk.a_block, rs);
            else {
                DenseMatrix mm = mass_matrix(blk.a_block, mass);
                term = matvec_t(blk.a_block, matvec(mm, rs));
            }
            vm.update(dot(term, term));
        }
        rep.variance_v = vm.mean;
    }

    DenseVector x_star = p.x_star ? *p.x_star : qr_lstsq(p.a, p.b);
    rep.bias_norm = nrm2_diff(rep.x_rho, x_star);

    const double rank_tol = default_rank_tol(p.rows(), p.cols());
    if (opts.mode == OracleMode::Enumerate &&
        sampler.family == SamplerKind::Family::UniformSubsets) {
        SubsetLaw law = uniform_law(p.rows(), k);
        for (const auto& subset : law.subsets) {
            BlockSample blk = extract_block(p, subset);
            const double bs = min_nonzero_singular_value(blk.a_block, rank_tol);
            rep.max_block_pinv_sq =
                bs > 0.0 ? std::max(rep.max_block_pinv_sq, 1.0 / (bs * bs))
                         : std::numeric_limits<double>::infinity();
        }
    }

    if (opts.with_bounds && opts.mode == OracleMode::Enumerate) {
        if (sampler.family == SamplerKind::Family::UniformSubsets) {
            if (mass.kind == MassMatrixKind::Kind::Rbk)
                rep.ledger = check_bounds_rbk(p, k, rep);
            else if (mass.kind == MassMatrixKind::Kind::ReBlocK)
                rep.ledger = check_bounds_reblock(p, k, mass.lambda, rep);
        } else if (sampler.family == SamplerKind::Family::KDpp &&
                   mass.kind == MassMatrixKind::Kind::ReBlocK) {
            // DPP sampling: closed-form W_bar agreement, x_rho = x*, and the
            // alpha lower bound for every ell < k.
            DenseMatrix closed = dpp_wbar_closed_form(p, k, mass.lambda);
            double dn = 0.0;
            for (std::size_t i = 0; i < closed.size(); ++i) {
                const double d = closed.data()[i] - rep.w_bar.data()[i];
                dn += d * d;
            }
            const double rel = std::sqrt(dn) / std::max(frobenius_norm(closed), 1e-300);
            rep.ledger.add_le("dpp_wbar_closed_form", rel, 0.0, 1e-9);
            rep.ledger.add_le("dpp_x_rho_equals_x_star", rep.bias_norm, 0.0,
                              1e-8 * std::max(1.0, nrm2(x_star)));
            for (std::size_t ell = 1; ell < k; ++ell) {
                DppAlphaBound b = dpp_alpha_bound(p, k, mass.lambda, ell);
                rep.ledger.add_ge("dpp_alpha_ell_" + std::to_string(ell), rep.alpha, b.bound,
                                  1e-10);
            }
            add_consistency_entries(rep.ledger, p, rep);
        }
    }
    return rep;
}

void save_oracle_json(const OracleReport& rep, const std::filesystem::path& file) {
    json j;
    j["mode"] = rep.mode == OracleMode::Enumerate ? "enumerate" : "montecarlo";
    if (rep.mode == OracleMode::MonteCarlo) {
        j["draws"] = rep.draws;
        j["max_std_error"] = rep.max_std_error;
    }
    j["alpha"] = rep.alpha;
    j["kappa_w"] = std::isfinite(rep.kappa_w) ? json(rep.kappa_w) : json("inf");
    j["r_rho_norm"] = nrm2(rep.r_rho);
    j["bias"] = rep.bias_norm;
    j["variance_v"] = rep.variance_v;
    j["max_block_pinv_sq"] = rep.max_block_pinv_sq;
    json xs = json::array();
    for (std::size_t i = 0; i < rep.x_rho.size(); ++i) xs.push_back(rep.x_rho[i]);
    j["x_rho"] = xs;
    json entries = json::array();
    for (const auto& e : rep.ledger.entries) {
        json je;
        je["name"] = e.name;
        je["bound"] = std::isfinite(e.bound_value) ? json(e.bound_value) : json("inf");
        je["actual"] = std::isfinite(e.actual_value) ? json(e.actual_value) : json("inf");
        je["holds"] = e.holds;
        entries.push_back(je);
    }
    j["ledger"] = entries;
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << j.dump(2) << "\n";
}

}  // namespace rowsolve
