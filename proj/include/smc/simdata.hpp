#pragma once

// Similarity matrices from (possibly incomplete) data: cosine similarity,
// overlap-restricted cosine for missing features, missingness masks and a
// seeded synthetic low-rank dataset generator.
//
// Row layout is always [search rows | query rows]: rows 0..n_search-1 are the
// search candidates, the remaining n_query rows are the queries.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smc/linalg.hpp"

namespace smc {

inline constexpr double kDefaultEpsilon = 1e-8;

/// Observation flags for an n×d data matrix (1 = observed).
class ObservationMask {
 public:
  ObservationMask() = default;
  ObservationMask(std::size_t rows, std::size_t cols, bool observed = true);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  bool observed(std::size_t i, std::size_t j) const { return flags_[i * cols_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool observed) { flags_[i * cols_ + j] = observed ? 1 : 0; }

  std::span<const std::uint8_t> row(std::size_t i) const { return {flags_.data() + i * cols_, cols_}; }
  std::size_t observed_in_row(std::size_t i) const;
  bool row_complete(std::size_t i) const { return observed_in_row(i) == cols_; }

  /// Stacks `bottom` under `top`.
  static ObservationMask vstack(const ObservationMask& top, const ObservationMask& bottom);

  friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> flags_;
};

struct MaskedDataset {
  DenseMatrix x;  // n×d, rows are samples
  ObservationMask mask;
  std::size_t n_search = 0;
  std::size_t n_query = 0;
  double epsilon = kDefaultEpsilon;
  // Off by default: missing entries are confined to query rows. Turning it on
  // lifts the complete-search-rows invariant for whole-matrix experiments.
  bool allow_search_missing = false;

  /// Throws DimensionMismatch / InvalidArgument when an invariant is broken.
  void validate() const;
};

struct MaskSpec {
  double rho = 0.0;  // missing ratio in [0, 1)
  std::uint64_t seed = 0;
};

double cosine_similarity(std::span<const double> x, std::span<const double> y, double epsilon = kDefaultEpsilon);

/// Cosine over the features observed in both vectors; 0 when that overlap is
/// empty.
double masked_cosine(std::span<const double> x, std::span<const double> y, std::span<const std::uint8_t> mask_x,
                     std::span<const std::uint8_t> mask_y, double epsilon = kDefaultEpsilon);

/// Pairwise cosine similarity of the rows of X.
SimilarityMatrix true_similarity(const DenseMatrix& x, double epsilon = kDefaultEpsilon);

/// The inaccurate initial similarity S⁰: pairs of complete rows use the plain
/// cosine, every other pair the overlap-restricted cosine.
SimilarityMatrix initial_similarity(const MaskedDataset& ds);

/// For each of `rows` rows, exactly ⌊ρ·d⌋ features are marked missing,
/// sampled uniformly without replacement.
ObservationMask generate_mask(std::size_t rows, std::size_t d, const MaskSpec& spec);

/// X = A·Bᵀ + noise with standard normal A (n×k), B (d×k) and N(0, σ²) noise.
DenseMatrix generate_synthetic(std::size_t n_search, std::size_t n_query, std::size_t d, std::size_t latent_rank,
                               double noise_sigma, std::uint64_t seed);

/// Drops rows whose entries are all zero (CSV ingestion).
DenseMatrix drop_zero_rows(const DenseMatrix& x);

}  // namespace smc
