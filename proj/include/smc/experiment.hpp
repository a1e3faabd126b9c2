#pragma once

// Experiment grid: configuration, execution and results files.
//
// A config is a JSON document:
//
//   {
//     "dataset": {"name": "synthetic",
//                 "synthetic": {"d": 100, "latent_rank": 20, "noise_sigma": 0.01, "seed": 7}},
//       or      {"name": "mnist", "csv_path": "features.csv"},
//     "n_search": 300, "n_query": 60,
//     "rho": [0.7, 0.8],
//     "solvers": ["SMCNN", "SMCNMF", "MEAN", {"kind": "SMC_GD", "tau": 0.01}],
//     "r": [40], "lambda": [0.001], "gamma": [0.001],
//     "iters": 10000,
//     "seeds": [0, 1, 2, 3, 4],
//     "k_fraction": 0.2,
//     "epsilon": 1e-8,            optional
//     "grad_tol": 0,              optional
//     "mask_search_rows": false   optional
//   }
//
// Rows come out in grid order: solver, rho, r, lambda, gamma, seed (outer to
// inner). For a given (rho, seed) every solver sees the same mask and S⁰; the
// seed also drives factor initialization.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "smc/metrics.hpp"
#include "smc/solvers.hpp"

namespace smc {

struct SyntheticSpec {
  std::size_t d = 0;
  std::size_t latent_rank = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string dataset_name = "synthetic";
  std::variant<SyntheticSpec, std::filesystem::path> dataset;
  std::size_t n_search = 0;
  std::size_t n_query = 0;
  std::vector<double> rho_list;
  std::vector<SolverConfig> solver_list;  // templates: kind, tau, grad_tol, bound_G
  std::vector<std::size_t> r_list;
  std::vector<double> lambda_list;
  std::vector<double> gamma_list;
  std::size_t iters = 10000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double k_fraction = 0.2;
  double epsilon = kDefaultEpsilon;
  double grad_tol = 0.0;
  bool mask_search_rows = false;

  /// Throws ConfigError.
  void validate() const;
  std::size_t cell_count() const;
};

/// Relative paths in "csv_path" resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::size_t jobs = 1;
  std::size_t trace_stride = 1;
  TopkScope scope = TopkScope::PerQuery;
};

struct ExperimentResult {
  std::string dataset;
  std::string solver;
  std::size_t n_search = 0;
  std::size_t n_query = 0;
  std::size_t d = 0;
  double rho = 0.0;
  std::size_t rank = 0;
  double lambda = 0.0;
  double gamma = 0.0;
  std::size_t iters = 0;  // iterations actually run (0 for MEAN)
  std::uint64_t seed = 0;
  double rmse = 0.0;  // NaN when unavailable
  double recall = 0.0;
  double ndcg = 0.0;
  std::optional<std::size_t> rank_hat;
  double total_seconds = 0.0;
  double seconds_per_iter = 0.0;
  std::string error;  // empty on success

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

/// What every cell of one (rho, seed) pair sees: the masked data, S⁰ and S*.
struct CellInputs {
  MaskedDataset dataset;
  SimilarityMatrix s0;
  SimilarityMatrix s_star;
};

/// Rebuilds the inputs run_grid uses for (rho, seed); throws on failure.
CellInputs cell_inputs(const ExperimentConfig& cfg, double rho, std::uint64_t seed);

/// Failures inside a cell are recorded in that row's `error` column.
std::vector<ExperimentResult> run_grid(const ExperimentConfig& cfg, const RunOptions& opts = {});

enum class ResultFormat { Csv, Json };

inline constexpr const char* kResultColumns =
    "dataset,solver,n_search,n_query,d,rho,rank,lambda,gamma,iters,seed,rmse,recall,ndcg,rank_hat,total_seconds,"
    "seconds_per_iter,error";

/// Throws InvalidArgument on empty rows and IoError when the file cannot be written.
void emit_results(const std::vector<ExperimentResult>& rows, const std::filesystem::path& path, ResultFormat format);
/// Reads either format; JSON is detected by a ".json" extension.
std::vector<ExperimentResult> load_results(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentResult& row);
ExperimentResult result_from_json(const nlohmann::json& obj);

/// Mean over rows of each group (rmse, recall, ndcg, rank_hat, seconds per
/// iteration) followed by a per-solver timing table.
std::string format_report(const std::vector<ExperimentResult>& rows, const std::vector<std::string>& group_by);

}  // namespace smc
