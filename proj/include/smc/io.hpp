#pragma once

// Matrix CSV files: no header, comma-separated decimal literals, one row per
// line. An empty field marks a missing value, which only load_masked_csv
// accepts.

#include <filesystem>

#include "smc/linalg.hpp"
#include "smc/simdata.hpp"

namespace smc {

struct MaskedMatrix {
  DenseMatrix values;  // missing cells hold 0
  ObservationMask mask;
};

/// Throws IoError, ParseError (with line/column) or RaggedRows.
DenseMatrix load_matrix_csv(const std::filesystem::path& path);
MaskedMatrix load_masked_csv(const std::filesystem::path& path);

/// Writes every value with 17 significant digits so a reload is bit-identical.
void save_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path);

}  // namespace smc
