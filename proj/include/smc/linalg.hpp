#pragma once

// Dense row-major matrices and the numerical kernels shared by the solvers:
// norms, products, a cyclic Jacobi symmetric eigensolver, projection onto the
// PSD cone, rank-r Gram factorization and effective rank.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace smc {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `data`; throws DimensionMismatch on a length
  /// mismatch and NonFinite if any entry is NaN or infinite.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;
  bool all_finite() const noexcept;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double scale);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator*(double scale, DenseMatrix m);

/// Dense symmetric n×n matrix in full storage. Construction symmetrizes via
/// (A + Aᵀ)/2, so S(i,j) == S(j,i) holds bit-exactly afterwards.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(const DenseMatrix& m);

  static SimilarityMatrix identity(std::size_t n) { return SimilarityMatrix(DenseMatrix::identity(n)); }
  static SimilarityMatrix diagonal(std::span<const double> diag) {
    return SimilarityMatrix(DenseMatrix::diagonal(diag));
  }

  std::size_t n() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const DenseMatrix& matrix() const noexcept { return m_; }
  double trace() const;

  friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

 private:
  DenseMatrix m_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // nonincreasing
  DenseMatrix eigenvectors;         // column i pairs with eigenvalues[i]

  /// U·diag(λ)·Uᵀ.
  DenseMatrix reconstruct() const;
};

double frobenius_norm(const DenseMatrix& m);
double frobenius_norm_sq(const DenseMatrix& m);
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

// Products. The `_into` forms reuse `out`'s storage when the shape matches.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b);  // aᵀ·b
DenseMatrix multiply_nt(const DenseMatrix& a, const DenseMatrix& b);  // a·bᵀ
void multiply_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void multiply_nt_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void multiply_tn_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

/// V·Vᵀ as a symmetric matrix.
SimilarityMatrix gram(const DenseMatrix& v);

inline constexpr double kDefaultSweepTol = 1e-12;
inline constexpr int kMaxJacobiSweeps = 30;

/// Cyclic row-by-row Jacobi. Stops once the largest off-diagonal magnitude is
/// at most sweep_tol·‖S‖_F and throws NonConvergence if that takes more than
/// max_sweeps sweeps. Eigenvalues come back nonincreasing (stable with
/// respect to the Jacobi output order on ties) and each eigenvector column is
/// sign-normalized so that its first nonzero entry is positive.
EigenDecomposition sym_eigendecompose(const SimilarityMatrix& s, double sweep_tol = kDefaultSweepTol,
                                      int max_sweeps = kMaxJacobiSweeps);

/// Σ|λᵢ|, the sum of singular values of a symmetric matrix.
double nuclear_norm(const SimilarityMatrix& s);

/// Euclidean projection onto the PSD cone (negative eigenvalues clamped to 0).
SimilarityMatrix psd_project(const SimilarityMatrix& s);

/// Best rank-r PSD factor: V = U_r·diag(√max(λ,0)), an n×r matrix.
DenseMatrix factor_from_psd(const SimilarityMatrix& s, std::size_t r);
DenseMatrix factor_from_eigen(const EigenDecomposition& eig, std::size_t r);

/// 1e-15·max(1, max|λ|).
double default_rank_threshold(std::span<const double> eigenvalues);

/// Number of eigenvalues with |λ| above `threshold` (default_rank_threshold
/// when unset).
std::size_t effective_rank(const SimilarityMatrix& s, std::optional<double> threshold = std::nullopt);
std::size_t effective_rank(const EigenDecomposition& eig, std::optional<double> threshold = std::nullopt);

}  // namespace smc
