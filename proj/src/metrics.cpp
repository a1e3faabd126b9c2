#include "smc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "smc/error.hpp"

namespace smc {

namespace {

void require_layout(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                    std::size_t n_query) {
  if (s_hat.n() != s_star.n()) throw Error(ErrorKind::DimensionMismatch, "estimate and truth sizes differ");
  if (n_search + n_query != s_hat.n()) {
    throw Error(ErrorKind::DimensionMismatch, "n_search + n_query != matrix size");
  }
  if (n_search == 0 || n_query == 0) throw Error(ErrorKind::InvalidK, "need at least one search and one query row");
}

// One ranking list per query (or a single flattened list in global scope).
std::vector<std::vector<double>> ranking_lists(const SimilarityMatrix& s, std::size_t n_search, std::size_t n_query,
                                               TopkScope scope) {
  std::vector<std::vector<double>> lists;
  if (scope == TopkScope::PerQuery) {
    lists.reserve(n_query);
    for (std::size_t q = 0; q < n_query; ++q) {
      const auto row = s.matrix().row(n_search + q);
      lists.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n_search));
    }
  } else {
    std::vector<double> flat;
    flat.reserve(n_search * n_query);
    for (std::size_t q = 0; q < n_query; ++q) {
      const auto row = s.matrix().row(n_search + q);
      flat.insert(flat.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n_search));
    }
    lists.push_back(std::move(flat));
  }
  return lists;
}

template <typename PerList>
double mean_over_lists(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                       std::size_t n_query, double k_fraction, TopkScope scope, PerList per_list) {
  require_layout(s_hat, s_star, n_search, n_query);
  const std::size_t pool = scope == TopkScope::PerQuery ? n_search : n_search * n_query;
  const std::size_t k = topk_size(pool, k_fraction);
  const auto est = ranking_lists(s_hat, n_search, n_query, scope);
  const auto truth = ranking_lists(s_star, n_search, n_query, scope);
  double total = 0.0;
  for (std::size_t l = 0; l < est.size(); ++l) {
    total += per_list(top_k_indices(est[l], k), top_k_indices(truth[l], k), k, pool);
  }
  return total / static_cast<double>(est.size());
}

}  // namespace

double rmse(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, const SimilarityMatrix& s0) {
  if (s_hat.n() != s_star.n() || s0.n() != s_star.n()) {
    throw Error(ErrorKind::DimensionMismatch, "rmse: matrix sizes differ");
  }
  const double baseline = frobenius_distance(s0.matrix(), s_star.matrix());
  if (baseline == 0.0) throw Error(ErrorKind::DegenerateBaseline, "S0 equals S*, relative error is undefined");
  const double err = frobenius_distance(s_hat.matrix(), s_star.matrix());
  return (err * err) / (baseline * baseline);
}

std::size_t topk_size(std::size_t pool, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidK, "k fraction must lie in (0, 1], got " + std::to_string(k_fraction));
  }
  if (pool == 0) throw Error(ErrorKind::InvalidK, "empty candidate pool");
  const auto k = static_cast<std::size_t>(std::floor(k_fraction * static_cast<double>(pool)));
  return std::clamp<std::size_t>(k, 1, pool);
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k) {
  k = std::min(k, scores.size());
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

double recall_at_topk(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                      std::size_t n_query, double k_fraction, TopkScope scope) {
  return mean_over_lists(s_hat, s_star, n_search, n_query, k_fraction, scope,
                         [](const std::vector<std::size_t>& est, const std::vector<std::size_t>& truth, std::size_t k,
                            std::size_t pool) {
                           std::vector<char> in_truth(pool, 0);
                           for (std::size_t i : truth) in_truth[i] = 1;
                           std::size_t hits = 0;
                           for (std::size_t i : est) hits += in_truth[i];
                           return static_cast<double>(hits) / static_cast<double>(k);
                         });
}

double ndcg_at_topk(const SimilarityMatrix& s_hat, const SimilarityMatrix& s_star, std::size_t n_search,
                    std::size_t n_query, double k_fraction, TopkScope scope) {
  return mean_over_lists(s_hat, s_star, n_search, n_query, k_fraction, scope,
                         [](const std::vector<std::size_t>& est, const std::vector<std::size_t>& truth, std::size_t k,
                            std::size_t pool) {
                           std::vector<char> in_truth(pool, 0);
                           for (std::size_t i : truth) in_truth[i] = 1;
                           double dcg = 0.0;
                           double idcg = 0.0;
                           for (std::size_t pos = 0; pos < k; ++pos) {
                             const double discount = 1.0 / std::log2(static_cast<double>(pos) + 2.0);
                             // (2^rel − 1) is 1 for a relevant item and 0 otherwise.
                             if (in_truth[est[pos]]) dcg += discount;
                             idcg += discount;
                           }
                           return idcg == 0.0 ? 0.0 : dcg / idcg;
                         });
}

std::size_t rank_report(const SimilarityMatrix& s_hat) { return effective_rank(s_hat); }

}  // namespace smc
