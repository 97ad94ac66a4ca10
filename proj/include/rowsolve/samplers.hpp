#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rowsolve/problem.hpp"
#include "rowsolve/rng.hpp"
#include "rowsolve/samplers_fwd.hpp"
#include "rowsolve/types.hpp"

namespace rowsolve {

/// Block-sampling distribution over row subsets.
struct SamplerKind {
    enum class Family { UniformSubsets, GaussianStream, KDpp };
    enum class KDppMode { Enumerate, EigenSample };

    Family family = Family::UniformSubsets;
    std::size_t k = 1;
    double lambda = 0.0;  // KDpp only
    KDppMode mode = KDppMode::EigenSample;

    static SamplerKind uniform(std::size_t k) { return {Family::UniformSubsets, k, 0.0, {}}; }
    static SamplerKind gaussian_stream(std::size_t k) {
        return {Family::GaussianStream, k, 0.0, {}};
    }
    static SamplerKind kdpp(std::size_t k, double lambda,
                            KDppMode mode = KDppMode::EigenSample) {
        require(lambda > 0.0, "SamplerKind: KDpp lambda must be > 0");
        return {Family::KDpp, k, lambda, mode};
    }

    std::string name() const;
};

/// Number of k-subsets, guarded against overflow past `cap`.
/// Returns cap + 1 if C(m, k) exceeds cap.
std::size_t binomial_capped(std::size_t m, std::size_t k, std::size_t cap);

/// Uniform random sorted k-subset of {0..m-1} via Floyd's algorithm
/// (exactly k draws from the generator).
std::vector<std::size_t> sample_uniform_subset(std::size_t m, std::size_t k, Rng& rng);

/// Runs fn(subset) for every sorted k-subset of {0..m-1} in lexicographic
/// order. Guarded by the caller.
template <typename Fn>
void for_each_subset(std::size_t m, std::size_t k, Fn&& fn) {
    std::vector<std::size_t> s(k);
    for (std::size_t i = 0; i < k; ++i) s[i] = i;
    while (true) {
        fn(const_cast<const std::vector<std::size_t>&>(s));
        std::size_t i = k;
        while (i-- > 0) {
            if (s[i] != i + m - k) {
                ++s[i];
                for (std::size_t j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
                break;
            }
            if (i == 0) return;
        }
    }
}

/// Extracts the rows of a finite problem at sorted indices, bit-exactly.
BlockSample extract_block(const LeastSquaresProblem& p,
                          const std::vector<std::size_t>& indices);

/// Elementary symmetric polynomials p_0..p_k of q plus the leave-one-out
/// values p_{k-1}(q_{-i}), computed by the addition-only recursion.
struct ElemSymPolys {
    DenseVector q;
    std::vector<double> values;   // p_0 .. p_k
    DenseVector leave_one_out;    // p_{k-1}(q_{-i}) for each i
};
ElemSymPolys elem_sym(const DenseVector& q, std::size_t k);

/// Exact k-DPP law Pr[S] = det(A_S A_S^T + lambda k I) / normalizer,
/// enumerated over all C(m,k) subsets (guarded at 1e6).
struct SubsetLaw {
    std::size_t m = 0, k = 0;
    std::vector<std::vector<std::size_t>> subsets;  // lexicographic order
    std::vector<double> probs;
};
SubsetLaw kdpp_probabilities_enumerate(const LeastSquaresProblem& p, std::size_t k,
                                       double lambda);

/// Uniform law over all k-subsets (same guard).
SubsetLaw uniform_law(std::size_t m, std::size_t k);

/// Exact k-DPP sample via the two-phase eigendecomposition algorithm.
/// Precomputes once; sample() draws a sorted index set.
class KDppEigenSampler {
  public:
    KDppEigenSampler(const DenseMatrix& a, std::size_t k, double lambda);
    std::vector<std::size_t> sample(Rng& rng) const;

  private:
    std::size_t m_, k_;
    DenseMatrix eigvecs_;                    // columns
    DenseVector eigvals_;                    // kernel eigenvalues, descending
    std::vector<std::vector<double>> etab_;  // e_j(q_1..q_i) table
};

std::vector<std::size_t> kdpp_sample_eigen(const LeastSquaresProblem& p, std::size_t k,
                                           double lambda, Rng& rng);

/// Unified block source: pairs a problem with a SamplerKind and hands out
/// BlockSamples. Precomputation (k-DPP law or eigendecomposition) happens
/// once at construction.
class BlockSampler {
  public:
    BlockSampler(const LeastSquaresProblem& p, const SamplerKind& kind);
    BlockSampler(const GaussianProblem& p, const SamplerKind& kind);

    BlockSample next(Rng& rng) const;
    const SamplerKind& kind() const { return kind_; }

  private:
    const LeastSquaresProblem* finite_ = nullptr;
    const GaussianProblem* gaussian_ = nullptr;
    SamplerKind kind_;
    std::shared_ptr<SubsetLaw> law_;  // KDpp Enumerate
    std::vector<double> law_cdf_;
    std::shared_ptr<KDppEigenSampler> eigen_;
};

/// One block from the given problem/sampler pair (convenience wrapper; for
/// repeated draws construct a BlockSampler once).
BlockSample next_block(const LeastSquaresProblem& p, const SamplerKind& kind, Rng& rng);
BlockSample next_block(const GaussianProblem& p, const SamplerKind& kind, Rng& rng);

}  // namespace rowsolve
