#include "smc/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "smc/error.hpp"

namespace smc {

ObservationMask::ObservationMask(std::size_t rows, std::size_t cols, bool observed)
    : rows_(rows), cols_(cols), flags_(rows * cols, observed ? 1 : 0) {}

std::size_t ObservationMask::observed_in_row(std::size_t i) const {
  const auto r = row(i);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

ObservationMask ObservationMask::vstack(const ObservationMask& top, const ObservationMask& bottom) {
  if (top.cols_ != bottom.cols_ && top.rows_ != 0 && bottom.rows_ != 0) {
    throw Error(ErrorKind::DimensionMismatch, "mask column counts differ");
  }
  ObservationMask out;
  out.rows_ = top.rows_ + bottom.rows_;
  out.cols_ = top.rows_ != 0 ? top.cols_ : bottom.cols_;
  out.flags_ = top.flags_;
  out.flags_.insert(out.flags_.end(), bottom.flags_.begin(), bottom.flags_.end());
  return out;
}

void MaskedDataset::validate() const {
  if (n_search + n_query != x.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "n_search + n_query (" + std::to_string(n_search + n_query) +
                                                  ") != rows(X) (" + std::to_string(x.rows()) + ")");
  }
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "mask shape differs from X");
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) {
    throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0, 1e-3]");
  }
  if (!allow_search_missing) {
    for (std::size_t i = 0; i < n_search; ++i) {
      if (!mask.row_complete(i)) {
        throw Error(ErrorKind::InvalidArgument, "search row " + std::to_string(i) + " has missing features");
      }
    }
  }
}

double cosine_similarity(std::span<const double> x, std::span<const double> y, double epsilon) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "cosine_similarity: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  double dot = 0.0;
  double xx = 0.0;
  double yy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    dot += x[k] * y[k];
    xx += x[k] * x[k];
    yy += y[k] * y[k];
  }
  return dot / (std::max(std::sqrt(xx), epsilon) * std::max(std::sqrt(yy), epsilon));
}

double masked_cosine(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> mask_x,
                     std::span<const std::uint8_t> mask_y, double epsilon) {
  if (x.size() != y.size() || mask_x.size() != x.size() || mask_y.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "masked_cosine: vector and mask lengths differ");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (mask_x[k] && mask_y[k]) {
      xs.push_back(x[k]);
      ys.push_back(y[k]);
    }
  }
  if (xs.empty()) return 0.0;
  return cosine_similarity(xs, ys, epsilon);
}

SimilarityMatrix true_similarity(const DenseMatrix& x, double epsilon) {
  const std::size_t n = x.rows();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "true_similarity needs at least two rows");
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = cosine_similarity(x.row(i), x.row(j), epsilon);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return SimilarityMatrix(s);
}

SimilarityMatrix initial_similarity(const MaskedDataset& ds) {
  ds.validate();
  const std::size_t n = ds.x.rows();
  std::vector<char> complete(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t seen = ds.mask.observed_in_row(i);
    if (seen == 0) throw Error(ErrorKind::AllMissingRow, "row " + std::to_string(i) + " has no observed features");
    complete[i] = seen == ds.x.cols();
  }
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = complete[i] && complete[j]
                           ? cosine_similarity(ds.x.row(i), ds.x.row(j), ds.epsilon)
                           : masked_cosine(ds.x.row(i), ds.x.row(j), ds.mask.row(i), ds.mask.row(j), ds.epsilon);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return SimilarityMatrix(s);
}

namespace {

std::size_t missing_count(double rho, std::size_t d) {
  // Absorb representation error so that e.g. 0.29·100 counts as 29.
  const auto count = static_cast<std::size_t>(std::floor(rho * static_cast<double>(d) + 1e-9));
  return d == 0 ? 0 : std::min(count, d - 1);
}

}  // namespace

ObservationMask generate_mask(std::size_t rows, std::size_t d, const MaskSpec& spec) {
  if (!(spec.rho >= 0.0 && spec.rho < 1.0)) {
    throw Error(ErrorKind::InvalidRho, "missing ratio must lie in [0, 1), got " + std::to_string(spec.rho));
  }
  ObservationMask mask(rows, d, true);
  const std::size_t missing = missing_count(spec.rho, d);
  if (missing == 0) return mask;

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> idx(d);
  for (std::size_t i = 0; i < rows; ++i) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `missing` slots form the sample.
    for (std::size_t k = 0; k < missing; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, d - 1);
      std::swap(idx[k], idx[pick(rng)]);
      mask.set(i, idx[k], false);
    }
  }
  return mask;
}

DenseMatrix generate_synthetic(std::size_t n_search, std::size_t n_query, std::size_t d, std::size_t latent_rank,
                               double noise_sigma, std::uint64_t seed) {
  const std::size_t n = n_search + n_query;
  if (latent_rank < 1 || latent_rank > std::min(n, d)) {
    throw Error(ErrorKind::InvalidRank, "latent rank " + std::to_string(latent_rank) + " outside [1, min(n, d)]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorKind::InvalidArgument, "noise_sigma must be finite and nonnegative");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  DenseMatrix b(d, latent_rank);
  for (double& v : b.data()) v = normal(rng);

  DenseMatrix x(n, d);
  std::vector<double> a(latent_rank);
  for (std::size_t i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) throw Error(ErrorKind::InvalidArgument, "could not draw a nonzero row");
      for (double& v : a) v = normal(rng);
      double norm_sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < latent_rank; ++k) v += a[k] * b(j, k);
        if (noise_sigma > 0.0) v += noise_sigma * normal(rng);
        x(i, j) = v;
        norm_sq += v * v;
      }
      if (std::sqrt(norm_sq) >= 1e-12) break;
    }
  }
  return x;
}

DenseMatrix drop_zero_rows(const DenseMatrix& x) {
  std::vector<double> kept;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; })) continue;
    kept.insert(kept.end(), r.begin(), r.end());
    ++rows;
  }
  return DenseMatrix(rows, x.cols(), std::move(kept));
}

}  // namespace smc
