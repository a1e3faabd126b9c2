#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smc {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  NonConvergence,
  InvalidRank,
  InvalidRho,
  AllMissingRow,
  EmptyFeature,
  InvalidBound,
  InvalidK,
  DegenerateBaseline,
  Diverged,
  ParseError,
  RaggedRows,
  IoError,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::InvalidRho: return "InvalidRho";
    case ErrorKind::AllMissingRow: return "AllMissingRow";
    case ErrorKind::EmptyFeature: return "EmptyFeature";
    case ErrorKind::InvalidBound: return "InvalidBound";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RaggedRows: return "RaggedRows";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so the
/// experiment runner can record it in a result row instead of aborting.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace smc
