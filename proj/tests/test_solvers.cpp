#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "smc/error.hpp"
#include "smc/solvers.hpp"
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

SolverConfig config(SolverKind kind, std::size_t r, double lambda, double gamma, std::size_t iters,
                    std::uint64_t seed = 0) {
  SolverConfig cfg;
  cfg.kind = kind;
  cfg.r = r;
  cfg.lambda = lambda;
  cfg.gamma = gamma;
  cfg.iters = iters;
  cfg.seed = seed;
  return cfg;
}

// Planted rank-2 PSD matrix plus symmetric noise.
struct Planted {
  SimilarityMatrix star;
  SimilarityMatrix s0;
};

Planted planted_rank2(std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto a = random_matrix(n, 2, rng, std::sqrt(0.5));
  const auto star = naive_gram(a);
  const auto e = random_symmetric(n, rng);
  return {star, SimilarityMatrix(star.matrix() + noise * e.matrix())};
}

using Oracle = double (*)(const DenseMatrix&, const SimilarityMatrix&, double);

}  // namespace

TEST_CASE("solver kind names") {
  for (auto k : {SolverKind::SMCNN, SolverKind::SMCNMF, SolverKind::SMC_F, SolverKind::SMC_NR, SolverKind::SMC_GD,
                 SolverKind::MC_ON, SolverKind::MC_FON, SolverKind::MEAN_IMPUTE})
    CHECK(parse_solver_kind(to_string(k)) == k);
  CHECK(parse_solver_kind("smcnn") == SolverKind::SMCNN);
  CHECK(parse_solver_kind("MEAN") == SolverKind::MEAN_IMPUTE);
  CHECK(kind_of([] { parse_solver_kind("SVD"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("factor initialization") {
  CHECK(init_factor(10, 3, 5).matrix() == init_factor(10, 3, 5).matrix());
  CHECK_FALSE(init_factor(10, 3, 5).matrix() == init_factor(10, 3, 6).matrix());
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto g = gram(init_factor(1000, 100, seed).matrix());
    double diag = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) diag += g(i, i);
    diag /= 1000.0;
    CHECK(diag > 0.9);
    CHECK(diag < 1.1);
  }
  CHECK(kind_of([] { init_factor(5, 5, 0); }) == ErrorKind::InvalidRank);
  CHECK(kind_of([] { init_factor(5, 0, 0); }) == ErrorKind::InvalidRank);
  CHECK(kind_of([] { FactorMatrix(DenseMatrix(3, 3)); }) == ErrorKind::InvalidRank);
}

TEST_CASE("gradients at hand-computed points") {
  const auto v = DenseMatrix::from_rows({{1.0}});
  const SimilarityMatrix zero(DenseMatrix(1, 1));
  // 4(1 − 0)·1 + 2·0.5·1
  CHECK(grad_smcnn(v, zero, 0.5)(0, 0) == doctest::Approx(5.0));
  // 4 + 2·0.5·(1 − 1/1)
  CHECK(grad_smcnmf(v, zero, 0.5)(0, 0) == doctest::Approx(4.0));
  // 4 + 2·0.5·1
  CHECK(grad_smc_f(v, zero, 0.5)(0, 0) == doctest::Approx(5.0));
  CHECK(grad_smc_nr(v, zero)(0, 0) == doctest::Approx(4.0));

  const auto w = DenseMatrix::from_rows({{2.0}});
  const auto h = DenseMatrix::from_rows({{1.0}});
  const auto [gw, gh] = mc_fon_gradients(w, h, zero);
  CHECK(gw(0, 0) == doctest::Approx(4.0));  // 2·(2·1 − 0)·1
  CHECK(gh(0, 0) == doctest::Approx(8.0));  // 2·(2·1 − 0)·2
}

TEST_CASE("gradients vanish at an exact fit") {
  std::mt19937_64 rng(4);
  const auto v = random_matrix(8, 3, rng);
  const auto s0 = gram(v);
  CHECK(frobenius_norm(grad_smcnn(v, s0, 0.0)) < 1e-12);
  CHECK(frobenius_norm(grad_smc_nr(v, s0)) < 1e-12);
  CHECK(frobenius_distance(grad_smcnmf(v, s0, 0.0), grad_smcnn(v, s0, 0.0)) < 1e-12);
  const auto [gw, gh] = mc_fon_gradients(v, v, s0);
  CHECK(frobenius_norm(gw) < 1e-12);
  CHECK(frobenius_norm(gh) < 1e-12);
}

TEST_CASE("SMCNMF drops the ratio term at a zero factor") {
  const DenseMatrix v(4, 2);
  std::mt19937_64 rng(2);
  const auto s0 = random_symmetric(4, rng);
  const auto g = grad_smcnmf(v, s0, 0.3);
  CHECK(g.all_finite());
  CHECK(frobenius_norm(g) == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  const struct {
    SolverKind kind;
    Oracle oracle;
  } cases[] = {{SolverKind::SMCNN, oracle_f1},
               {SolverKind::SMCNMF, oracle_f2},
               {SolverKind::SMC_F, oracle_smc_f},
               {SolverKind::SMC_NR, oracle_smc_nr}};
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> n_dist(4, 12);
  std::uniform_real_distribution<double> lambda_dist(0.0, 1.0);
  for (const auto& c : cases) {
    CAPTURE(to_string(c.kind));
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = n_dist(rng);
      const std::size_t r = 1 + trial % (n - 1);
      const auto v = random_matrix(n, r, rng);
      const auto s0 = random_symmetric(n, rng);
      const double lambda = trial == 0 ? 0.1 : lambda_dist(rng);

      const auto analytic = factor_gradient(c.kind, v, s0, lambda);
      const auto numeric = finite_difference([&](const DenseMatrix& p) { return c.oracle(p, s0, lambda); }, v);
      CHECK(max_relative_error(analytic, numeric) < 1e-5);
      CHECK(factor_objective(c.kind, v, s0, lambda) ==
            doctest::Approx(c.oracle(v, s0, lambda)).epsilon(1e-11));
    }
  }
}

TEST_CASE("MC_FON gradients match finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 8;
    const std::size_t r = 1 + trial % 3;
    const auto w = random_matrix(n, r, rng);
    const auto h = random_matrix(n, r, rng);
    const auto s0 = random_symmetric(n, rng);
    const auto [gw, gh] = mc_fon_gradients(w, h, s0);
    const auto nw = finite_difference([&](const DenseMatrix& p) { return naive_fit(p, h, s0); }, w);
    const auto nh = finite_difference([&](const DenseMatrix& p) { return naive_fit(w, p, s0); }, h);
    CHECK(max_relative_error(gw, nw) < 1e-5);
    CHECK(max_relative_error(gh, nh) < 1e-5);
  }
}

TEST_CASE("a planted solution is a fixed point without regularization") {
  std::mt19937_64 rng(12);
  const auto v = random_matrix(10, 2, rng);
  const auto s0 = gram(v);
  for (auto kind : {SolverKind::SMCNN, SolverKind::SMCNMF, SolverKind::SMC_F, SolverKind::SMC_NR}) {
    const auto sol = solve_factorized(s0, config(kind, 2, 0.0, 1e-3, 50), FactorMatrix(v));
    for (double f : sol.trace.objective) CHECK(f < 1e-20);
    CHECK(frobenius_distance(sol.estimate.matrix(), s0.matrix()) < 1e-12);
  }
}

TEST_CASE("SMCNN recovers a rank-2 matrix") {
  const auto p = planted_rank2(10, 0.0, 21);
  const auto sol = solve_factorized(p.s0, config(SolverKind::SMCNN, 2, 0.0, 1e-2, 5000, 1));
  CHECK(frobenius_distance(sol.estimate.matrix(), p.star.matrix()) < 0.05);
}

TEST_CASE("a large stepsize diverges") {
  const auto p = planted_rank2(10, 0.1, 22);
  CHECK(kind_of([&] { solve_factorized(p.s0, config(SolverKind::SMCNN, 2, 1e-3, 10.0, 200)); }) ==
        ErrorKind::Diverged);
}

TEST_CASE("factorized estimates are PSD with rank at most r") {
  const auto p = planted_rank2(20, 0.3, 23);
  for (auto kind : {SolverKind::SMCNN, SolverKind::SMCNMF, SolverKind::SMC_F, SolverKind::SMC_NR,
                    SolverKind::SMC_GD}) {
    CAPTURE(to_string(kind));
    for (std::size_t r : {1u, 3u, 6u}) {
      const auto cfg = config(kind, r, 1e-2, 5e-3, 300, r);
      const auto sol = kind == SolverKind::SMC_GD ? solve_smc_gd(p.s0, cfg) : solve_factorized(p.s0, cfg);
      CHECK(effective_rank(sol.estimate) <= r);
      CHECK(min_eigenvalue(sol.estimate) >= -1e-10 * std::max(1.0, sol.estimate.trace()));
      CHECK(frobenius_distance(sol.estimate.matrix(), gram(sol.factor.matrix()).matrix()) == 0.0);
    }
  }
}

TEST_CASE("runs are deterministic") {
  const auto p = planted_rank2(15, 0.2, 24);
  for (auto kind : {SolverKind::SMCNN, SolverKind::SMCNMF}) {
    const auto cfg = config(kind, 3, 1e-3, 5e-3, 200, 42);
    const auto a = solve_factorized(p.s0, cfg);
    const auto b = solve_factorized(p.s0, cfg);
    CHECK(a.estimate.matrix() == b.estimate.matrix());
    CHECK(a.trace.objective == b.trace.objective);
  }
  const auto cfg = config(SolverKind::MC_FON, 3, 0.0, 5e-3, 200, 42);
  CHECK(solve_mc_fon(p.s0, cfg).estimate.matrix() == solve_mc_fon(p.s0, cfg).estimate.matrix());
}

TEST_CASE("trace bookkeeping") {
  const auto p = planted_rank2(12, 0.2, 25);
  auto cfg = config(SolverKind::SMCNN, 3, 1e-3, 5e-3, 100, 1);
  cfg.trace_stride = 10;
  const auto sol = solve_factorized(p.s0, cfg);
  CHECK(sol.trace.iterations == 100);
  CHECK(sol.trace.objective_iters.front() == 0);
  CHECK(sol.trace.objective_iters.back() == 100);
  CHECK(sol.trace.objective.size() == sol.trace.objective_iters.size());
  CHECK(sol.trace.objective.size() == 11);
  CHECK(sol.trace.wall_nanos_per_iter.size() == 100);
  CHECK(sol.trace.objective.back() ==
        doctest::Approx(oracle_f1(sol.factor.matrix(), p.s0, 1e-3)).epsilon(1e-11));

  cfg.grad_tol = 1e6;
  const auto early = solve_factorized(p.s0, cfg);
  CHECK(early.trace.iterations == 0);
}

TEST_CASE("soft-thresholding the spectrum") {
  const auto s = soft_threshold_spectrum(SimilarityMatrix::diagonal(std::vector<double>{1.0, 0.5, 0.1}), 0.2);
  const auto eig = sym_eigendecompose(s);
  CHECK(eig.eigenvalues[0] == doctest::Approx(0.8).epsilon(1e-13));
  CHECK(eig.eigenvalues[1] == doctest::Approx(0.3).epsilon(1e-13));
  CHECK(std::abs(eig.eigenvalues[2]) < 1e-14);
  CHECK_THROWS_AS(soft_threshold_spectrum(s, -1.0), Error);
}

TEST_CASE("factor shrinkage agrees with thresholding the n×n Gram matrix") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + trial % 10;
    const std::size_t r = 1 + trial % 4;
    const auto v = random_matrix(n, r, rng);
    const double tau = 0.5 * trial;
    const auto via_factor = gram(shrink_factor_spectrum(v, tau));
    const auto via_full = soft_threshold_spectrum(naive_gram(v), tau);
    CHECK(frobenius_distance(via_factor.matrix(), via_full.matrix()) <=
          1e-9 * std::max(1.0, frobenius_norm(via_full.matrix())));
  }
}

TEST_CASE("SMC_GD") {
  const auto p = planted_rank2(10, 0.05, 26);

  SUBCASE("zero threshold tracks SMC_NR") {
    auto cfg = config(SolverKind::SMC_GD, 3, 0.0, 5e-3, 300, 3);
    cfg.tau = 0.0;
    const auto gd = solve_smc_gd(p.s0, cfg);
    cfg.kind = SolverKind::SMC_NR;
    const auto nr = solve_factorized(p.s0, cfg);
    CHECK(frobenius_distance(gd.estimate.matrix(), nr.estimate.matrix()) < 1e-9);
  }

  SUBCASE("accuracy comparable to SMCNN") {
    double err_gd = 0.0, err_nn = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto cfg = config(SolverKind::SMC_GD, 2, 1e-3, 1e-2, 2000, seed);
      err_gd += frobenius_distance(solve_smc_gd(p.s0, cfg).estimate.matrix(), p.star.matrix());
      cfg.kind = SolverKind::SMCNN;
      err_nn += frobenius_distance(solve_factorized(p.s0, cfg).estimate.matrix(), p.star.matrix());
    }
    CHECK(err_gd <= 2.0 * err_nn);
    CHECK(err_nn <= 2.0 * err_gd);
  }
}

TEST_CASE("MC_ON") {
  SUBCASE("a matrix with spectrum above the floor is a fixed point") {
    std::mt19937_64 rng(5);
    const auto s = SimilarityMatrix(random_psd(6, 6, rng).matrix() + DenseMatrix::identity(6));
    const auto sol = solve_mc_on(s, config(SolverKind::MC_ON, 1, 0.0, 1.0, 5));
    CHECK(frobenius_distance(sol.estimate.matrix(), s.matrix()) < 1e-12);
  }
  SUBCASE("negative eigenvalues are lifted to the floor") {
    const auto sol =
        solve_mc_on(SimilarityMatrix::diagonal(std::vector<double>{1.0, -0.5}), config(SolverKind::MC_ON, 1, 0, 1, 3));
    CHECK(sol.estimate(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sol.estimate(1, 1) == doctest::Approx(kDefaultMcOnTau).epsilon(1e-10));
    CHECK(std::abs(sol.estimate(0, 1)) < 1e-14);
  }
  SUBCASE("the iteration is idempotent after one step") {
    std::mt19937_64 rng(6);
    const auto sol = solve_mc_on(random_symmetric(10, rng), config(SolverKind::MC_ON, 1, 1e-3, 1.0, 5));
    REQUIRE(sol.trace.step_change.size() == 5);
    CHECK(sol.trace.step_change[0] > 1e-3);
    for (std::size_t i = 1; i < 5; ++i) CHECK(sol.trace.step_change[i] <= 1e-12);
  }
}

TEST_CASE("MC_FON decreases its objective") {
  const auto p = planted_rank2(12, 0.1, 27);
  const auto sol = solve_mc_fon(p.s0, config(SolverKind::MC_FON, 3, 0.0, 5e-3, 500, 2));
  const auto& f = sol.trace.objective;
  CHECK(f.back() < 0.1 * f.front());
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] <= f[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("MEAN imputation") {
  SUBCASE("fills from the search-row feature mean") {
    MaskedDataset ds;
    ds.x = DenseMatrix::from_rows({{1, 1}, {3, 1}, {0, 1}});
    ds.mask = ObservationMask(3, 2);
    ds.mask.set(2, 0, false);
    ds.n_search = 2;
    ds.n_query = 1;
    const auto s = mean_impute_similarity(ds);
    const auto expected = true_similarity(DenseMatrix::from_rows({{1, 1}, {3, 1}, {2, 1}}));
    CHECK(frobenius_distance(s.matrix(), expected.matrix()) == 0.0);
  }
  SUBCASE("nothing missing gives the true similarity") {
    const auto x = generate_synthetic(8, 3, 5, 2, 0.1, 1);
    MaskedDataset ds{x, ObservationMask(11, 5), 8, 3};
    CHECK(mean_impute_similarity(ds) == true_similarity(x));
  }
  SUBCASE("a feature with no observed search value is an error") {
    MaskedDataset ds{DenseMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}}), ObservationMask(3, 2), 2, 1};
    ds.allow_search_missing = true;
    ds.mask.set(0, 1, false);
    ds.mask.set(1, 1, false);
    CHECK(kind_of([&] { mean_impute_similarity(ds); }) == ErrorKind::EmptyFeature);
  }
}

TEST_CASE("theorem stepsize") {
  CHECK(stepsize_from_theorem(1.0, 0.0) == doctest::Approx(1.0 / 6.0));
  CHECK(stepsize_from_theorem(2.0, 1.0) == doctest::Approx(1.0 / 25.0));
  double prev = stepsize_from_theorem(0.1, 0.01);
  for (double g = 0.2; g < 10.0; g += 0.1) {
    const double cur = stepsize_from_theorem(g, 0.01);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(kind_of([] { stepsize_from_theorem(0.0, 0.1); }) == ErrorKind::InvalidBound);
  CHECK(kind_of([] { stepsize_from_theorem(-1.0, 0.1); }) == ErrorKind::InvalidBound);
}

TEST_CASE("theorem stepsize gives monotone descent") {
  const auto p = planted_rank2(20, 0.1, 28);
  auto cfg = config(SolverKind::SMCNN, 4, 1e-3, 0.0, 500, 9);
  const auto run = solve_with_theorem_stepsize(p.s0, cfg);
  CHECK(run.measured_G <= run.bound_G);
  const auto& f = run.solution.trace.objective;
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] <= f[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(config(SolverKind::SMCNN, 0, 1e-3, 1e-3, 10).validate(), Error);
  CHECK_THROWS_AS(config(SolverKind::SMCNN, 1, -1.0, 1e-3, 10).validate(), Error);
  CHECK_THROWS_AS(config(SolverKind::SMCNN, 1, 1e-3, 0.0, 10).validate(), Error);
  CHECK_THROWS_AS(solve_factorized(SimilarityMatrix::identity(4), config(SolverKind::MC_ON, 1, 0, 1, 1)), Error);
  CHECK(kind_of([] { solve_factorized(SimilarityMatrix::identity(4), config(SolverKind::SMCNN, 4, 0, 1e-3, 1)); }) ==
        ErrorKind::InvalidRank);
}
