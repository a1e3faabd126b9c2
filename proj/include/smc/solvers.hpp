#pragma once

// Similarity matrix completion solvers.
//
// The two main methods fit a Gram factor V (n×r, r < n) so that Ŝ = V·Vᵀ is
// PSD with rank at most r by construction, using plain gradient descent:
//
//   SMCNN   F₁(V) = ‖VVᵀ − S⁰‖²_F + λ‖V‖²_F
//   SMCNMF  F₂(V) = ‖VVᵀ − S⁰‖²_F + λ(‖V‖²_F − ‖VVᵀ‖_F)
//
// plus the ablations SMC_F, SMC_NR, SMC_GD, MC_ON, MC_FON and the MEAN
// imputation baseline.
//
// SMC_F reproduces the ablation as it was run: its gradient is
// 4(VVᵀ − S⁰)V + 2λ·VVᵀV, which is the derivative of
// ‖VVᵀ − S⁰‖²_F + (λ/2)‖VVᵀ‖²_F. The objective traced here is that function.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smc/linalg.hpp"
#include "smc/simdata.hpp"

namespace smc {

enum class SolverKind { SMCNN, SMCNMF, SMC_F, SMC_NR, SMC_GD, MC_ON, MC_FON, MEAN_IMPUTE };

std::string_view to_string(SolverKind kind);
/// Accepts the enum spelling case-insensitively, plus "MEAN" and "MC_fON".
SolverKind parse_solver_kind(std::string_view name);
bool is_factorized(SolverKind kind);

inline constexpr double kDefaultMcOnTau = 1e-4;

struct SolverConfig {
  SolverKind kind = SolverKind::SMCNN;
  std::size_t r = 1;
  double lambda = 1e-3;
  double gamma = 1e-3;
  std::size_t iters = 10000;
  std::uint64_t seed = 0;
  // SMC_GD: absolute soft-threshold per iteration (γ·λ when unset).
  // MC_ON: eigenvalue floor (kDefaultMcOnTau when unset).
  std::optional<double> tau;
  double grad_tol = 0.0;  // 0 disables early stopping
  std::optional<double> bound_G;
  std::size_t trace_stride = 1;

  void validate() const;
};

/// Per-run convergence record. Objective values are recorded at iterations
/// listed in `objective_iters` (every `stride`-th iterate plus the final one);
/// gradient norms likewise at `grad_iters`, indexed by the iterate the
/// gradient was evaluated at.
struct ConvergenceTrace {
  std::size_t stride = 1;
  std::size_t iterations = 0;  // iterations actually run
  std::vector<double> objective;
  std::vector<std::size_t> objective_iters;
  std::vector<double> grad_norm_sq;
  std::vector<std::size_t> grad_iters;
  std::vector<double> step_change;  // MC_ON: ‖Sᵗ − Sᵗ⁻¹‖_F
  std::vector<std::int64_t> wall_nanos_per_iter;
  std::int64_t total_nanos = 0;
  double max_factor_norm = 0.0;  // max over iterates of ‖Vᵗ‖_F

  double min_grad_norm_sq(std::size_t upto_iter) const;
};

class FactorMatrix {
 public:
  FactorMatrix() = default;
  /// Throws InvalidRank unless 1 ≤ r < n, NonFinite on bad entries.
  explicit FactorMatrix(DenseMatrix v);

  std::size_t n() const noexcept { return v_.rows(); }
  std::size_t r() const noexcept { return v_.cols(); }
  const DenseMatrix& matrix() const noexcept { return v_; }

 private:
  DenseMatrix v_;
};

struct FactorizedSolution {
  FactorMatrix factor;
  SimilarityMatrix estimate;
  ConvergenceTrace trace;
};

struct MatrixSolution {
  SimilarityMatrix estimate;
  ConvergenceTrace trace;
};

/// i.i.d. N(0, 1/r) entries, so E[diag(VVᵀ)] = 1.
FactorMatrix init_factor(std::size_t n, std::size_t r, std::uint64_t seed);

DenseMatrix grad_smcnn(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda);
/// The Frobenius-ratio term is dropped when ‖VVᵀ‖_F < 1e-12.
DenseMatrix grad_smcnmf(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda);
DenseMatrix grad_smc_f(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda);
DenseMatrix grad_smc_nr(const DenseMatrix& v, const SimilarityMatrix& s0);

/// Objective of a Gram-factor solver kind (SMCNN, SMCNMF, SMC_F, SMC_NR, SMC_GD).
double factor_objective(SolverKind kind, const DenseMatrix& v, const SimilarityMatrix& s0, double lambda);
DenseMatrix factor_gradient(SolverKind kind, const DenseMatrix& v, const SimilarityMatrix& s0, double lambda);

/// (∇_W, ∇_H) of ‖WHᵀ − S⁰‖²_F.
std::pair<DenseMatrix, DenseMatrix> mc_fon_gradients(const DenseMatrix& w, const DenseMatrix& h,
                                                     const SimilarityMatrix& s0);

/// Plain gradient descent for SMCNN, SMCNMF, SMC_F and SMC_NR.
FactorizedSolution solve_factorized(const SimilarityMatrix& s0, const SolverConfig& cfg);
FactorizedSolution solve_factorized(const SimilarityMatrix& s0, const SolverConfig& cfg, FactorMatrix start);

/// Gradient step on the fit term followed by eigenvalue soft-thresholding of
/// VVᵀ and re-factorization at rank r.
FactorizedSolution solve_smc_gd(const SimilarityMatrix& s0, const SolverConfig& cfg);

/// Eigenvalue floor iteration S ← U·max(Σ, τ)·Uᵀ starting from S⁰.
MatrixSolution solve_mc_on(const SimilarityMatrix& s0, const SolverConfig& cfg);

/// Simultaneous gradient steps on the two factors of WHᵀ.
MatrixSolution solve_mc_fon(const SimilarityMatrix& s0, const SolverConfig& cfg);

/// MEAN baseline: fill missing entries with the per-feature mean of the
/// observed search-row values, then take the plain cosine similarity.
SimilarityMatrix mean_impute_similarity(const MaskedDataset& ds);

/// Eigenvalues λ of S replaced by max(λ − τ, 0).
SimilarityMatrix soft_threshold_spectrum(const SimilarityMatrix& s, double tau);

/// Factor of the soft-thresholded Gram matrix: returns V' with
/// V'V'ᵀ = U·max(Λ − τ, 0)·Uᵀ where VVᵀ = UΛUᵀ, computed through the r×r
/// matrix VᵀV.
DenseMatrix shrink_factor_spectrum(const DenseMatrix& v, double tau);

/// 1/(6G² + λ).
double stepsize_from_theorem(double bound_G, double lambda);

struct TheoremStepRun {
  FactorizedSolution solution;
  double bound_G = 0.0;       // bound used for the final run
  double measured_G = 0.0;    // max ‖Vᵗ‖_F of the final run
  bool rerun = false;         // the first guess was violated
};

/// Runs SMCNN with γ = stepsize_from_theorem(G, λ). G starts at
/// cfg.bound_G (or ‖V⁰‖_F); if the run exceeds it, the run is repeated once
/// with the measured maximum.
TheoremStepRun solve_with_theorem_stepsize(const SimilarityMatrix& s0, const SolverConfig& cfg);

}  // namespace smc
