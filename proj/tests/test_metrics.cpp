#include <doctest.h>

#include <cmath>
#include <random>

#include "smc/error.hpp"
#include "smc/metrics.hpp"
#include "test_support.hpp"

using namespace smc;
using namespace smc::testing;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an smc::Error");
  return ErrorKind::InvalidArgument;
}

// One query (row 5) over five candidates. Only the query row matters.
SimilarityMatrix one_query(const std::vector<double>& scores) {
  DenseMatrix m(6, 6);
  for (std::size_t j = 0; j < 5; ++j) {
    m(5, j) = scores[j];
    m(j, 5) = scores[j];
  }
  return SimilarityMatrix(m);
}

}  // namespace

TEST_CASE("rmse") {
  const auto star = SimilarityMatrix::identity(2);
  const SimilarityMatrix zero(DenseMatrix(2, 2));
  CHECK(rmse(star, star, zero) == 0.0);
  CHECK(rmse(zero, star, zero) == 1.0);
  CHECK(rmse(SimilarityMatrix(2.0 * DenseMatrix::identity(2)), star, zero) == doctest::Approx(1.0));
  CHECK(kind_of([&] { rmse(zero, star, star); }) == ErrorKind::DegenerateBaseline);
  CHECK(kind_of([&] { rmse(zero, SimilarityMatrix::identity(3), zero); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("rmse grows along a line away from the truth") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto star = random_symmetric(6, rng);
    const auto s0 = random_symmetric(6, rng);
    const auto dir = random_symmetric(6, rng);
    double prev = -1.0;
    for (double t = 0.0; t <= 2.0; t += 0.25) {
      const double v = rmse(SimilarityMatrix(star.matrix() + t * dir.matrix()), star, s0);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("top-k size") {
  CHECK(topk_size(10, 0.2) == 2);
  CHECK(topk_size(3, 0.2) == 1);
  CHECK(topk_size(10, 1.0) == 10);
  CHECK(kind_of([] { topk_size(10, 0.0); }) == ErrorKind::InvalidK);
  CHECK(kind_of([] { topk_size(10, 1.5); }) == ErrorKind::InvalidK);
  CHECK(kind_of([] { topk_size(0, 0.5); }) == ErrorKind::InvalidK);
}

TEST_CASE("top-k indices break ties by index") {
  CHECK(top_k_indices({0.5, 0.9, 0.5, 0.1}, 3) == std::vector<std::size_t>{1, 0, 2});
  CHECK(top_k_indices({1, 1, 1}, 2) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("recall and nDCG on hand-built rankings") {
  const auto truth = one_query({0.9, 0.8, 0.1, 0.2, 0.3});  // top-2 = {0, 1}

  CHECK(recall_at_topk(truth, truth, 5, 1, 0.4) == 1.0);
  CHECK(ndcg_at_topk(truth, truth, 5, 1, 0.4) == doctest::Approx(1.0));

  const auto disjoint = one_query({0.1, 0.2, 0.9, 0.8, 0.3});
  CHECK(recall_at_topk(disjoint, truth, 5, 1, 0.4) == 0.0);
  CHECK(ndcg_at_topk(disjoint, truth, 5, 1, 0.4) == 0.0);

  // Estimated order 3, 0: one hit at position 2.
  const auto half = one_query({0.8, 0.1, 0.2, 0.9, 0.3});
  CHECK(recall_at_topk(half, truth, 5, 1, 0.4) == 0.5);
  const double expected = (1.0 / std::log2(3.0)) / (1.0 + 1.0 / std::log2(3.0));
  CHECK(ndcg_at_topk(half, truth, 5, 1, 0.4) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.3869).epsilon(1e-4));
}

TEST_CASE("metrics agree with brute force") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_search = 8, n_query = 2;
    // Every third trial uses quantized scores to exercise ties.
    auto sample = [&] {
      DenseMatrix d = random_symmetric(10, rng).matrix();
      if (trial % 3 == 0)
        for (double& x : d.data()) x = level(rng);
      return SimilarityMatrix(d);
    };
    const auto est = sample();
    const auto truth = sample();
    const double frac = trial % 2 ? 0.25 : 0.5;
    const std::size_t k = topk_size(n_search, frac);
    CHECK(recall_at_topk(est, truth, n_search, n_query, frac) ==
          doctest::Approx(brute_recall(est, truth, n_search, n_query, k)).epsilon(1e-14));
    CHECK(ndcg_at_topk(est, truth, n_search, n_query, frac) ==
          doctest::Approx(brute_ndcg(est, truth, n_search, n_query, k)).epsilon(1e-14));
  }
}

TEST_CASE("ranking metrics are invariant to monotone rescaling") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto est = random_symmetric(12, rng);
    const auto truth = random_symmetric(12, rng);
    DenseMatrix scaled = est.matrix();
    for (double& x : scaled.data()) x = 3.0 * x + 7.0;
    const SimilarityMatrix est2(scaled);
    CHECK(recall_at_topk(est, truth, 9, 3, 0.3) == recall_at_topk(est2, truth, 9, 3, 0.3));
    CHECK(ndcg_at_topk(est, truth, 9, 3, 0.3) == ndcg_at_topk(est2, truth, 9, 3, 0.3));
  }
}

TEST_CASE("global scope") {
  std::mt19937_64 rng(4);
  const auto s = random_symmetric(10, rng);
  CHECK(recall_at_topk(s, s, 7, 3, 0.2, TopkScope::Global) == 1.0);
  CHECK(ndcg_at_topk(s, s, 7, 3, 0.2, TopkScope::Global) == doctest::Approx(1.0));

  // Flattened brute force over the 3×7 query-search block.
  const auto est = random_symmetric(10, rng);
  std::vector<double> e, t;
  for (std::size_t q = 0; q < 3; ++q)
    for (std::size_t j = 0; j < 7; ++j) {
      e.push_back(est(7 + q, j));
      t.push_back(s(7 + q, j));
    }
  const std::size_t k = topk_size(21, 0.2);
  const auto te = brute_top_k(e, k), tt = brute_top_k(t, k);
  std::size_t hits = 0;
  for (auto i : te) hits += std::count(tt.begin(), tt.end(), i);
  CHECK(recall_at_topk(est, s, 7, 3, 0.2, TopkScope::Global) ==
        doctest::Approx(static_cast<double>(hits) / static_cast<double>(k)));
}

TEST_CASE("layout errors") {
  const auto s = SimilarityMatrix::identity(5);
  CHECK(kind_of([&] { recall_at_topk(s, s, 3, 3, 0.2); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { recall_at_topk(s, s, 4, 1, 0.0); }) == ErrorKind::InvalidK);
  CHECK(kind_of([&] { ndcg_at_topk(s, SimilarityMatrix::identity(4), 3, 1, 0.2); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("rank report") {
  CHECK(rank_report(SimilarityMatrix::identity(6)) == 6);
  CHECK(rank_report(SimilarityMatrix(DenseMatrix(4, 4))) == 0);
  std::mt19937_64 rng(5);
  CHECK(rank_report(gram(random_matrix(20, 3, rng))) <= 3);
}
