#include "smc/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "smc/error.hpp"

namespace smc {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapConst as_eigen(const DenseMatrix& m) {
  return MapConst(m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

Map as_eigen(DenseMatrix& m) {
  return Map(m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

void reshape(DenseMatrix& out, std::size_t rows, std::size_t cols) {
  if (out.rows() != rows || out.cols() != cols) out = DenseMatrix(rows, cols);
}

// Flip each column so its first entry that is not numerically zero is positive.
void normalize_column_signs(DenseMatrix& u) {
  constexpr double kZero = 1e-12;
  for (std::size_t j = 0; j < u.cols(); ++j) {
    for (std::size_t i = 0; i < u.rows(); ++i) {
      const double x = u(i, j);
      if (std::abs(x) <= kZero) continue;
      if (x < 0) {
        for (std::size_t k = 0; k < u.rows(); ++k) u(k, j) = -u(k, j);
      }
      break;
    }
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw Error(ErrorKind::NonFinite, "fill value is not finite");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::DimensionMismatch, "data length " + std::to_string(data_.size()) + " != " +
                                                  std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  if (!all_finite()) throw Error(ErrorKind::NonFinite, "matrix contains NaN or Inf");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  if (!m.all_finite()) throw Error(ErrorKind::NonFinite, "diagonal contains NaN or Inf");
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorKind::DimensionMismatch, "ragged initializer rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
  for (double& x : data_) x *= scale;
  return *this;
}

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs += rhs; }
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs -= rhs; }
DenseMatrix operator*(double scale, DenseMatrix m) { return m *= scale; }

SimilarityMatrix::SimilarityMatrix(const DenseMatrix& m) : m_(m.rows(), m.cols()) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "similarity matrix must be square, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.all_finite()) throw Error(ErrorKind::NonFinite, "similarity matrix contains NaN or Inf");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    m_(i, i) = m(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m_(i, j) = v;
      m_(j, i) = v;
    }
  }
}

double SimilarityMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n(); ++i) t += m_(i, i);
  return t;
}

DenseMatrix EigenDecomposition::reconstruct() const {
  const std::size_t n = eigenvectors.rows();
  DenseMatrix scaled = eigenvectors;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < eigenvalues.size(); ++j) scaled(i, j) *= eigenvalues[j];
  return multiply_nt(scaled, eigenvectors);
}

double frobenius_norm_sq(const DenseMatrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return s;
}

double frobenius_norm(const DenseMatrix& m) { return std::sqrt(frobenius_norm_sq(m)); }

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void multiply_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::DimensionMismatch, "multiply: inner dimensions differ");
  reshape(out, a.rows(), b.cols());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
}

void multiply_nt_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::DimensionMismatch, "multiply_nt: inner dimensions differ");
  reshape(out, a.rows(), b.rows());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b).transpose();
}

void multiply_tn_into(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::DimensionMismatch, "multiply_tn: inner dimensions differ");
  reshape(out, a.cols(), b.cols());
  as_eigen(out).noalias() = as_eigen(a).transpose() * as_eigen(b);
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out;
  multiply_into(a, b, out);
  return out;
}

DenseMatrix multiply_nt(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out;
  multiply_nt_into(a, b, out);
  return out;
}

DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out;
  multiply_tn_into(a, b, out);
  return out;
}

SimilarityMatrix gram(const DenseMatrix& v) { return SimilarityMatrix(multiply_nt(v, v)); }

EigenDecomposition sym_eigendecompose(const SimilarityMatrix& s, double sweep_tol, int max_sweeps) {
  if (!(sweep_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "sweep_tol must be positive");
  if (max_sweeps < 1) throw Error(ErrorKind::InvalidArgument, "max_sweeps must be at least 1");
  const std::size_t n = s.n();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "cannot decompose an empty matrix");

  // `a` is the working copy kept fully symmetric; `ut` holds eigenvectors as
  // rows so both row updates of a rotation touch contiguous memory. `a` is in
  // extended precision: roundoff accumulated over sweeps lands on the small
  // eigenvalues, and in double it sits right at the 1e-15 rank threshold.
  std::vector<long double> a(s.matrix().data().begin(), s.matrix().data().end());
  std::vector<double> ut(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) ut[i * n + i] = 1.0;

  const double limit = sweep_tol * frobenius_norm(s.matrix());
  auto max_off_diagonal = [&] {
    double m = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) m = std::max(m, static_cast<double>(std::abs(a[p * n + q])));
    return m;
  };

  // Once the tolerance is met, one more sweep: inside a cluster of equal
  // eigenvalues (the null space of a low-rank Gram matrix) the leftover
  // off-diagonal mass is the eigenvalue error, and 1e-12·‖S‖ would swamp the
  // rank threshold.
  bool polished = false;
  for (int sweep = 0;; ++sweep) {
    if (max_off_diagonal() <= limit) {
      if (polished) break;
      polished = true;
    } else if (sweep >= max_sweeps) {
      throw Error(ErrorKind::NonConvergence,
                  "Jacobi did not converge within " + std::to_string(max_sweeps) + " sweeps (n=" +
                      std::to_string(n) + ")");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const long double apq = a[p * n + q];
        if (apq == 0.0L) continue;
        const long double app = a[p * n + p];
        const long double aqq = a[q * n + q];

        const long double theta = (aqq - app) / (2.0L * apq);
        long double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5L / theta;
        } else {
          t = 1.0L / (std::abs(theta) + std::sqrt(theta * theta + 1.0L));
          if (theta < 0.0L) t = -t;
        }
        const long double c = 1.0L / std::sqrt(t * t + 1.0L);
        const long double sn = t * c;

        long double* rp = &a[p * n];
        long double* rq = &a[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const long double akp = rp[k];
          const long double akq = rq[k];
          rp[k] = c * akp - sn * akq;
          rq[k] = sn * akp + c * akq;
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = 0.0L;
        rq[p] = 0.0L;
        for (std::size_t k = 0; k < n; ++k) {
          a[k * n + p] = rp[k];
          a[k * n + q] = rq[k];
        }

        const auto cd = static_cast<double>(c), sd = static_cast<double>(sn);
        double* up = &ut[p * n];
        double* uq = &ut[q * n];
        for (std::size_t k = 0; k < n; ++k) {
          const double ukp = up[k];
          const double ukq = uq[k];
          up[k] = cd * ukp - sd * ukq;
          uq[k] = sd * ukp + cd * ukq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = DenseMatrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.eigenvalues[col] = static_cast<double>(a[src * n + src]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, col) = ut[src * n + i];
  }
  normalize_column_signs(out.eigenvectors);
  return out;
}

double nuclear_norm(const SimilarityMatrix& s) {
  const auto eig = sym_eigendecompose(s);
  double total = 0.0;
  for (double l : eig.eigenvalues) total += std::abs(l);
  return total;
}

SimilarityMatrix psd_project(const SimilarityMatrix& s) {
  const auto eig = sym_eigendecompose(s);
  return gram(factor_from_eigen(eig, s.n()));
}

DenseMatrix factor_from_eigen(const EigenDecomposition& eig, std::size_t r) {
  const std::size_t n = eig.eigenvectors.rows();
  if (r < 1 || r > n) {
    throw Error(ErrorKind::InvalidRank, "factor rank " + std::to_string(r) + " outside [1, " + std::to_string(n) + "]");
  }
  DenseMatrix v(n, r);
  for (std::size_t j = 0; j < r; ++j) {
    const double scale = std::sqrt(std::max(eig.eigenvalues[j], 0.0));
    for (std::size_t i = 0; i < n; ++i) v(i, j) = eig.eigenvectors(i, j) * scale;
  }
  return v;
}

DenseMatrix factor_from_psd(const SimilarityMatrix& s, std::size_t r) {
  if (r < 1 || r > s.n()) {
    throw Error(ErrorKind::InvalidRank,
                "factor rank " + std::to_string(r) + " outside [1, " + std::to_string(s.n()) + "]");
  }
  return factor_from_eigen(sym_eigendecompose(s), r);
}

double default_rank_threshold(std::span<const double> eigenvalues) {
  double largest = 0.0;
  for (double l : eigenvalues) largest = std::max(largest, std::abs(l));
  return 1e-15 * std::max(1.0, largest);
}

std::size_t effective_rank(const EigenDecomposition& eig, std::optional<double> threshold) {
  const double limit = threshold.value_or(default_rank_threshold(eig.eigenvalues));
  if (!(limit > 0.0)) throw Error(ErrorKind::InvalidArgument, "rank threshold must be positive");
  return static_cast<std::size_t>(
      std::count_if(eig.eigenvalues.begin(), eig.eigenvalues.end(), [&](double l) { return std::abs(l) > limit; }));
}

std::size_t effective_rank(const SimilarityMatrix& s, std::optional<double> threshold) {
  return effective_rank(sym_eigendecompose(s), threshold);
}

}  // namespace smc
