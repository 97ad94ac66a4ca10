#include "rowsolve/samplers.hpp"

#include <algorithm>
#include <cmath>

#include "rowsolve/kernels.hpp"
#include "rowsolve/linalg.hpp"

namespace rowsolve {

std::string SamplerKind::name() const {
    switch (family) {
        case Family::UniformSubsets: return "uniform";
        case Family::GaussianStream: return "gaussian-stream";
        case Family::KDpp: return mode == KDppMode::Enumerate ? "kdpp-enumerate" : "kdpp-eigen";
    }
    return "?";
}

std::size_t binomial_capped(std::size_t m, std::size_t k, std::size_t cap) {
    if (k > m) return 0;
    k = std::min(k, m - k);
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * (m - k + i) / i;  // exact: every prefix is a binomial
        if (c > cap) return cap + 1;
    }
    return static_cast<std::size_t>(c);
}

std::vector<std::size_t> sample_uniform_subset(std::size_t m, std::size_t k, Rng& rng) {
    require(k >= 1 && k <= m, "sample_uniform_subset: need 1 <= k <= m");
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t j = m - k; j < m; ++j) {
        const std::size_t t = static_cast<std::size_t>(rng.next_below(j + 1));
        if (std::find(chosen.begin(), chosen.end(), t) != chosen.end())
            chosen.push_back(j);
        else
            chosen.push_back(t);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

BlockSample extract_block(const LeastSquaresProblem& p,
                          const std::vector<std::size_t>& indices) {
    BlockSample s;
    s.indices = indices;
    s.a_block = DenseMatrix(indices.size(), p.cols());
    s.b_block = DenseVector(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        require(i < p.rows(), "extract_block: index out of range");
        std::copy(p.a.row(i), p.a.row(i) + p.cols(), s.a_block.row(r));
        s.b_block[r] = p.b[i];
    }
    return s;
}

ElemSymPolys elem_sym(const DenseVector& q, std::size_t k) {
    const std::size_t m = q.size();
    require(k <= m, "elem_sym: k must be <= m");
    for (std::size_t i = 0; i < m; ++i)
        require(q[i] >= 0.0, "elem_sym: entries must be nonnegative");

    auto run = [&](std::size_t skip, std::size_t deg) {
        std::vector<double> e(deg + 1, 0.0);
        e[0] = 1.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == skip) continue;
            ++used;
            const std::size_t top = std::min(deg, used);
            for (std::size_t j = top; j >= 1; --j) e[j] += q[i] * e[j - 1];
        }
        return e;
    };

    ElemSymPolys out;
    out.q = q;
    out.values = run(m, k);  // skip index m = skip nothing
    out.leave_one_out.resize(m);
    if (k >= 1) {
        const std::ptrdiff_t mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * m * k >= (1u << 18))
        for (std::ptrdiff_t i = 0; i < mm; ++i)
            out.leave_one_out[i] = run(static_cast<std::size_t>(i), k - 1)[k - 1];
    } else {
        for (std::size_t i = 0; i < m; ++i) out.leave_one_out[i] = 0.0;
    }
    return out;
}

namespace {

constexpr std::size_t kEnumerateGuard = 1000000;

std::vector<double> normalize_from_logs(std::vector<double>& logs) {
    double mx = -1e300;
    for (double l : logs) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logs) z += std::exp(l - mx);
    std::vector<double> probs(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) probs[i] = std::exp(logs[i] - mx) / z;
    return probs;
}

}  // namespace

SubsetLaw uniform_law(std::size_t m, std::size_t k) {
    require(k >= 1 && k <= m, "uniform_law: need 1 <= k <= m");
    const std::size_t count = binomial_capped(m, k, kEnumerateGuard);
    if (count > kEnumerateGuard)
        throw GuardError("uniform_law: C(m,k) exceeds the enumeration guard of 1e6");
    SubsetLaw law;
    law.m = m;
    law.k = k;
    law.subsets.reserve(count);
    for_each_subset(m, k, [&](const std::vector<std::size_t>& s) { law.subsets.push_back(s); });
    law.probs.assign(law.subsets.size(), 1.0 / static_cast<double>(law.subsets.size()));
    return law;
}

SubsetLaw kdpp_probabilities_enumerate(const LeastSquaresProblem& p, std::size_t k,
                                       double lambda) {
    require(k >= 1 && k <= p.rows(), "kdpp_probabilities_enumerate: need 1 <= k <= m");
    require(lambda > 0.0, "kdpp_probabilities_enumerate: lambda must be > 0");
    const std::size_t count = binomial_capped(p.rows(), k, kEnumerateGuard);
    if (count > kEnumerateGuard)
        throw GuardError(
            "kdpp_probabilities_enumerate: C(m,k) exceeds the enumeration guard of 1e6; "
            "use the EigenSample backend");
    SubsetLaw law;
    law.m = p.rows();
    law.k = k;
    law.subsets.reserve(count);
    std::vector<double> logs;
    logs.reserve(count);
    const double shift = lambda * static_cast<double>(k);
    for_each_subset(p.rows(), k, [&](const std::vector<std::size_t>& s) {
        BlockSample blk = extract_block(p, s);
        DenseMatrix g = gram_aat(blk.a_block);
        for (std::size_t i = 0; i < k; ++i) g(i, i) += shift;
        law.subsets.push_back(s);
        logs.push_back(cholesky_logdet(g));
    });
    law.probs = normalize_from_logs(logs);
    return law;
}

// ---------------------------------------------------------------------------
// k-DPP sampling via eigendecomposition (Kulesza & Taskar Alg. 1 specialised
// to fixed size k with the elementary-symmetric-polynomial phase).
// ---------------------------------------------------------------------------

KDppEigenSampler::KDppEigenSampler(const DenseMatrix& a, std::size_t k, double lambda)
    : m_(a.rows()), k_(k) {
    require(k >= 1 && k <= m_, "kdpp_sample_eigen: need 1 <= k <= m");
    require(lambda > 0.0, "kdpp_sample_eigen: lambda must be > 0");
    require(m_ <= 5000, "kdpp_sample_eigen: m exceeds the dense eigendecomposition cap");
    DenseMatrix kernel = gram_aat(a);
    for (std::size_t i = 0; i < m_; ++i)
        kernel(i, i) += lambda * static_cast<double>(k);
    SymEig e = eigh(kernel);
    eigvals_ = e.values;
    eigvecs_ = e.vectors;
    // etab_[j][i] = e_j of the first i eigenvalues (in stored order)
    etab_.assign(k_ + 1, std::vector<double>(m_ + 1, 0.0));
    for (std::size_t i = 0; i <= m_; ++i) etab_[0][i] = 1.0;
    for (std::size_t j = 1; j <= k_; ++j)
        for (std::size_t i = 1; i <= m_; ++i)
            etab_[j][i] = etab_[j][i - 1] + eigvals_[i - 1] * etab_[j - 1][i - 1];
}

std::vector<std::size_t> KDppEigenSampler::sample(Rng& rng) const {
    // Phase 1: choose k eigenvectors with Pr ~ products of eigenvalues.
    std::vector<std::size_t> chosen_vecs;
    chosen_vecs.reserve(k_);
    std::size_t remaining = k_;
    for (std::size_t i = m_; i-- > 0 && remaining > 0;) {
        double marg;
        if (remaining == i + 1) {
            marg = 1.0;  // must take all that are left
        } else {
            const double denom = etab_[remaining][i + 1];
            if (denom <= 0.0) continue;
            marg = eigvals_[i] * etab_[remaining - 1][i] / denom;
        }
        if (rng.next_double() < marg) {
            chosen_vecs.push_back(i);
            --remaining;
        }
    }
    if (remaining != 0) throw NumericError("kdpp_sample_eigen: eigenvector phase failed");

    // Phase 2: sample indices from the projection DPP spanned by the chosen
    // eigenvectors, conditioning after each pick.
    DenseMatrix v(m_, k_);
    for (std::size_t c = 0; c < k_; ++c)
        for (std::size_t i = 0; i < m_; ++i) v(i, c) = eigvecs_(i, chosen_vecs[c]);

    std::vector<std::size_t> picked;
    picked.reserve(k_);
    std::size_t cols = k_;
    std::vector<double> weights(m_);
    while (cols > 0) {
        double total = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            double w = 0.0;
            for (std::size_t c = 0; c < cols; ++c) w += v(i, c) * v(i, c);
            weights[i] = w;
            total += w;
        }
        double r = rng.next_double() * total;
        std::size_t a = m_ - 1;
        for (std::size_t i = 0; i < m_; ++i) {
            r -= weights[i];
            if (r <= 0.0) {
                a = i;
                break;
            }
        }
        picked.push_back(a);

        if (cols == 1) break;
        // eliminate row a: pivot on the column with the largest |V(a, c)|
        std::size_t piv = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (std::fabs(v(a, c)) > std::fabs(v(a, piv))) piv = c;
        const double pivval = v(a, piv);
        if (pivval == 0.0) throw NumericError("kdpp_sample_eigen: zero pivot in conditioning");
        for (std::size_t c = 0; c < cols; ++c) {
            if (c == piv) continue;
            const double f = v(a, c) / pivval;
            if (f == 0.0) continue;
            for (std::size_t i = 0; i < m_; ++i) v(i, c) -= f * v(i, piv);
        }
        // drop the pivot column, then re-orthonormalize the rest
        for (std::size_t c = piv; c + 1 < cols; ++c)
            for (std::size_t i = 0; i < m_; ++i) v(i, c) = v(i, c + 1);
        --cols;
        for (std::size_t c = 0; c < cols; ++c) {
            for (int round = 0; round < 2; ++round)
                for (std::size_t l = 0; l < c; ++l) {
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m_; ++i) proj += v(i, l) * v(i, c);
                    for (std::size_t i = 0; i < m_; ++i) v(i, c) -= proj * v(i, l);
                }
            double nrm = 0.0;
            for (std::size_t i = 0; i < m_; ++i) nrm += v(i, c) * v(i, c);
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) throw NumericError("kdpp_sample_eigen: degenerate conditioning");
            for (std::size_t i = 0; i < m_; ++i) v(i, c) /= nrm;
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

std::vector<std::size_t> kdpp_sample_eigen(const LeastSquaresProblem& p, std::size_t k,
                                           double lambda, Rng& rng) {
    KDppEigenSampler sampler(p.a, k, lambda);
    return sampler.sample(rng);
}

// ---------------------------------------------------------------------------
// BlockSampler
// ---------------------------------------------------------------------------

BlockSampler::BlockSampler(const LeastSquaresProblem& p, const SamplerKind& kind)
    : finite_(&p), kind_(kind) {
    require(kind.k >= 1, "BlockSampler: k must be >= 1");
    switch (kind.family) {
        case SamplerKind::Family::GaussianStream:
            throw ContractError("BlockSampler: GaussianStream requires a GaussianProblem");
        case SamplerKind::Family::UniformSubsets:
            require(kind.k <= p.rows(), "BlockSampler: k must be <= m");
            break;
        case SamplerKind::Family::KDpp:
            require(kind.k <= p.rows(), "BlockSampler: k must be <= m");
            if (kind.mode == SamplerKind::KDppMode::Enumerate) {
                law_ = std::make_shared<SubsetLaw>(
                    kdpp_probabilities_enumerate(p, kind.k, kind.lambda));
                law_cdf_.resize(law_->probs.size());
                double acc = 0.0;
                for (std::size_t i = 0; i < law_->probs.size(); ++i) {
                    acc += law_->probs[i];
                    law_cdf_[i] = acc;
                }
            } else {
                eigen_ = std::make_shared<KDppEigenSampler>(p.a, kind.k, kind.lambda);
            }
            break;
    }
}

BlockSampler::BlockSampler(const GaussianProblem& p, const SamplerKind& kind)
    : gaussian_(&p), kind_(kind) {
    require(kind.family == SamplerKind::Family::GaussianStream,
            "BlockSampler: only GaussianStream applies to a GaussianProblem");
    require(kind.k >= 1, "BlockSampler: k must be >= 1");
}

BlockSample BlockSampler::next(Rng& rng) const {
    if (gaussian_) return sample_gaussian_block(*gaussian_, kind_.k, rng);
    switch (kind_.family) {
        case SamplerKind::Family::UniformSubsets:
            return extract_block(*finite_, sample_uniform_subset(finite_->rows(), kind_.k, rng));
        case SamplerKind::Family::KDpp:
            if (law_) {
                const double r = rng.next_double();
                const auto it = std::lower_bound(law_cdf_.begin(), law_cdf_.end(), r);
                const std::size_t idx =
                    std::min<std::size_t>(it - law_cdf_.begin(), law_->subsets.size() - 1);
                return extract_block(*finite_, law_->subsets[idx]);
            }
            return extract_block(*finite_, eigen_->sample(rng));
        default:
            throw ContractError("BlockSampler: inconsistent state");
    }
}

BlockSample next_block(const LeastSquaresProblem& p, const SamplerKind& kind, Rng& rng) {
    return BlockSampler(p, kind).next(rng);
}

BlockSample next_block(const GaussianProblem& p, const SamplerKind& kind, Rng& rng) {
    return BlockSampler(p, kind).next(rng);
}

}  // namespace rowsolve
