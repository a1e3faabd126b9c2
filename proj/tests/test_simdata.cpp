#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "smc/error.hpp"
#include "smc/simdata.hpp"
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

// Row cosine written from the definition, independent of the library.
double plain_cosine(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return dot / (std::max(std::sqrt(nx), kDefaultEpsilon) * std::max(std::sqrt(ny), kDefaultEpsilon));
}

std::vector<double> row_of(const DenseMatrix& m, std::size_t i) {
  const auto r = m.row(i);
  return {r.begin(), r.end()};
}

MaskedDataset dataset(DenseMatrix x, ObservationMask mask, std::size_t n_search) {
  MaskedDataset ds;
  ds.n_search = n_search;
  ds.n_query = x.rows() - n_search;
  ds.x = std::move(x);
  ds.mask = std::move(mask);
  return ds;
}

}  // namespace

TEST_CASE("cosine similarity") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{1, 2, 3}, d{2, 4, 6}, zero{0, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(c, d) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cosine_similarity(zero, a) == 0.0);
  CHECK(kind_of([&] { cosine_similarity(a, c); }) == ErrorKind::DimensionMismatch);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_matrix(2, 7, rng);
    const double v = cosine_similarity(m.row(0), m.row(1));
    CHECK(v <= 1.0 + 1e-15);
    CHECK(v >= -1.0 - 1e-15);
    CHECK(v == doctest::Approx(plain_cosine(row_of(m, 0), row_of(m, 1))).epsilon(1e-13));
  }
}

TEST_CASE("masked cosine") {
  const std::vector<double> x{1, 2, 3}, y{9, 2, 0};
  const std::vector<std::uint8_t> all{1, 1, 1}, tail{0, 1, 1}, head{1, 0, 0};
  CHECK(masked_cosine(x, y, all, tail) == doctest::Approx(4.0 / (std::sqrt(13.0) * 2.0)).epsilon(1e-14));
  CHECK(masked_cosine(x, y, head, tail) == 0.0);
  CHECK(masked_cosine(x, y, all, all) == cosine_similarity(x, y));
}

TEST_CASE("true similarity") {
  const auto s = true_similarity(DenseMatrix::identity(3));
  CHECK(frobenius_distance(s.matrix(), DenseMatrix::identity(3)) == 0.0);

  const auto twin = true_similarity(DenseMatrix::from_rows({{1, 2}, {1, 2}}));
  CHECK(twin(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(2);
  const auto x = random_matrix(6, 4, rng);
  const auto t = true_similarity(x);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(t(i, i) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(t(i, j) == doctest::Approx(plain_cosine(row_of(x, i), row_of(x, j))).epsilon(1e-13));
      CHECK(t(i, j) == t(j, i));
    }
  }
  CHECK(min_eigenvalue(t) >= -1e-12);
  CHECK(kind_of([] { true_similarity(DenseMatrix(1, 3, 1.0)); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("initial similarity") {
  std::mt19937_64 rng(3);
  const auto x = random_matrix(5, 4, rng);

  SUBCASE("fully observed equals the true similarity") {
    const auto ds = dataset(x, ObservationMask(5, 4), 3);
    CHECK(frobenius_distance(initial_similarity(ds).matrix(), true_similarity(x).matrix()) == 0.0);
  }

  SUBCASE("search block is exact and query pairs use the overlap") {
    ObservationMask mask(5, 4);
    mask.set(3, 0, false);
    mask.set(4, 1, false);
    mask.set(4, 2, false);
    const auto ds = dataset(x, mask, 3);
    const auto s0 = initial_similarity(ds);
    const auto truth = true_similarity(x);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(s0(i, j) == truth(i, j));

    const auto r0 = row_of(x, 0), r3 = row_of(x, 3), r4 = row_of(x, 4);
    CHECK(s0(3, 0) == doctest::Approx(plain_cosine({r3[1], r3[2], r3[3]}, {r0[1], r0[2], r0[3]})).epsilon(1e-13));
    CHECK(s0(4, 3) == doctest::Approx(plain_cosine({r4[3]}, {r3[3]})).epsilon(1e-13));
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::abs(s0(i, j)) <= 1.0 + 1e-15);
        CHECK(s0(i, j) == s0(j, i));
      }
  }

  SUBCASE("a query row with one observed feature gives unit-magnitude or zero entries") {
    ObservationMask mask(5, 4);
    for (std::size_t j = 1; j < 4; ++j) mask.set(4, j, false);
    const auto s0 = initial_similarity(dataset(x, mask, 3));
    for (std::size_t j = 0; j < 4; ++j) {
      const double v = s0(4, j);
      CHECK((std::abs(std::abs(v) - 1.0) < 1e-14 || v == 0.0));
    }
  }

  SUBCASE("an all-missing row is rejected") {
    ObservationMask mask(5, 4);
    for (std::size_t j = 0; j < 4; ++j) mask.set(4, j, false);
    CHECK(kind_of([&] { initial_similarity(dataset(x, mask, 3)); }) == ErrorKind::AllMissingRow);
  }

  SUBCASE("missing search entries need the explicit opt-in") {
    ObservationMask mask(5, 4);
    mask.set(0, 0, false);
    auto ds = dataset(x, mask, 3);
    CHECK_THROWS_AS(initial_similarity(ds), Error);
    ds.allow_search_missing = true;
    CHECK_NOTHROW(initial_similarity(ds));
  }
}

TEST_CASE("initial similarity under heavy missingness is not PSD") {
  // Overlap cosines are computed on different feature subsets per pair, so
  // the assembled matrix is generally indefinite.
  const auto x = generate_synthetic(40, 20, 30, 5, 0.0, 4);
  auto mask = ObservationMask::vstack(ObservationMask(40, 30), generate_mask(20, 30, {0.8, 4}));
  const auto s0 = initial_similarity(dataset(x, mask, 40));
  CHECK(min_eigenvalue(s0) < -1e-6);
}

TEST_CASE("mask generation") {
  SUBCASE("rho = 0 observes everything") {
    const auto m = generate_mask(4, 6, {0.0, 1});
    CHECK(m == ObservationMask(4, 6));
  }
  SUBCASE("exact per-row count") {
    const auto m = generate_mask(20, 10, {0.5, 9});
    for (std::size_t i = 0; i < 20; ++i) CHECK(m.observed_in_row(i) == 5);
  }
  SUBCASE("floor of rho*d, with binary-fraction rounding absorbed") {
    CHECK(generate_mask(3, 10, {0.7, 2}).observed_in_row(0) == 3);
    CHECK(generate_mask(3, 10, {0.99, 2}).observed_in_row(1) == 1);
    CHECK(generate_mask(3, 7, {0.5, 2}).observed_in_row(2) == 4);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(generate_mask(30, 12, {0.4, 17}) == generate_mask(30, 12, {0.4, 17}));
    CHECK_FALSE(generate_mask(30, 12, {0.4, 17}) == generate_mask(30, 12, {0.4, 18}));
  }
  SUBCASE("missing positions are roughly uniform over features") {
    const std::size_t rows = 4000, d = 8;
    const auto m = generate_mask(rows, d, {0.5, 5});
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t missing = 0;
      for (std::size_t i = 0; i < rows; ++i) missing += m.observed(i, j) ? 0 : 1;
      // Expected 2000, sd ≈ 29.
      CHECK(std::abs(static_cast<double>(missing) - 2000.0) < 150.0);
    }
  }
  CHECK(kind_of([] { generate_mask(2, 3, {1.0, 0}); }) == ErrorKind::InvalidRho);
  CHECK(kind_of([] { generate_mask(2, 3, {-0.1, 0}); }) == ErrorKind::InvalidRho);
}

TEST_CASE("synthetic data") {
  SUBCASE("noiseless data has the latent rank") {
    const auto x = generate_synthetic(40, 10, 20, 2, 0.0, 3);
    CHECK(x.rows() == 50);
    CHECK(x.cols() == 20);
    const auto eig = sym_eigendecompose(naive_gram(x));
    CHECK(eig.eigenvalues[1] > 1e-6 * eig.eigenvalues[0]);
    CHECK(std::abs(eig.eigenvalues[2]) < 1e-10 * eig.eigenvalues[0]);

    // Row normalization preserves the rank: S* is rank 2 as well.
    const auto star = sym_eigendecompose(true_similarity(x));
    CHECK(std::abs(star.eigenvalues[2]) < 1e-12 * star.eigenvalues[0]);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(generate_synthetic(10, 5, 6, 3, 0.1, 8) == generate_synthetic(10, 5, 6, 3, 0.1, 8));
    CHECK_FALSE(generate_synthetic(10, 5, 6, 3, 0.1, 8) == generate_synthetic(10, 5, 6, 3, 0.1, 9));
  }
  SUBCASE("noise lifts the rank") {
    const auto x = generate_synthetic(20, 5, 10, 2, 0.1, 3);
    CHECK(effective_rank(naive_gram(x), 1e-8) == 10);
  }
  CHECK(kind_of([] { generate_synthetic(10, 5, 6, 0, 0.0, 1); }) == ErrorKind::InvalidRank);
  CHECK(kind_of([] { generate_synthetic(10, 5, 6, 7, 0.0, 1); }) == ErrorKind::InvalidRank);
}

TEST_CASE("zero rows are dropped") {
  const auto x = DenseMatrix::from_rows({{1, 2}, {0, 0}, {3, 0}});
  const auto y = drop_zero_rows(x);
  CHECK(y == DenseMatrix::from_rows({{1, 2}, {3, 0}}));
}
