#pragma once

// Evaluation of an estimated similarity matrix Ŝ against the ground truth S*.
//
// Ranking metrics score each query row (rows n_search..n_search+n_query-1)
// by ranking the search candidates 0..n_search-1 on the query-vs-search block,
// then average over queries. Rankings sort by descending score with ties
// broken by ascending candidate index. TopkScope::Global instead ranks every
// (query, candidate) pair of that block in one list.

#include <cstddef>
#include <vector>

#include "smc/linalg.hpp"

namespace smc {

enum class TopkScope { PerQuery, Global };

struct MetricReport {
  double rmse = 0.0;
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  double k_fraction = 0.2;
  std::size_t rank_hat = 0;
  double elapsed_seconds = 0.0;
};

/// ‖Ŝ − S*‖²_F / ‖S⁰ − S*‖²_F. Throws DegenerateBaseline when S⁰ = S*.
double rmse(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, const SimilarityMatrix& s0);

/// k = max(1, ⌊k_fraction·pool⌋) where pool is n_search (per query) or
/// n_search·n_query (global). Throws InvalidK when k_fraction ∉ (0, 1] or the
/// pool is empty.
std::size_t topk_size(std::size_t pool, double k_fraction);

/// Indices of the k best entries of `scores`, best first.
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k);

double recall_at_topk(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                      std::size_t n_query, double k_fraction, TopkScope scope = TopkScope::PerQuery);

/// Binary relevance: an item at estimated position i is relevant iff it is in
/// the true top-k set. IDCG is the all-relevant prefix of length k.
double ndcg_at_topk(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                    std::size_t n_query, double k_fraction, TopkScope scope = TopkScope::PerQuery);

/// Rank of Ŝ with eigenvalue threshold 1e-15·max(1, λ_max).
std::size_t rank_report(const SimilarityMatrix& s_hat);

}  // namespace smc
