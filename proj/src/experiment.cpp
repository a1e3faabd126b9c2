#include "smc/experiment.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <thread>

#include "smc/error.hpp"
#include "smc/io.hpp"
#include "smc/simdata.hpp"

namespace smc {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename T>
std::vector<T> number_list(const json& doc, const char* key, bool required = true) {
  if (!doc.contains(key)) {
    if (required) config_error(std::string("missing key '") + key + "'");
    return {};
  }
  const json& v = doc.at(key);
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) config_error(std::string("'") + key + "' must contain numbers");
      out.push_back(e.get<T>());
    }
  } else if (v.is_number()) {
    out.push_back(v.get<T>());
  } else {
    config_error(std::string("'") + key + "' must be a number or an array of numbers");
  }
  return out;
}

SolverConfig solver_template(const json& entry) {
  SolverConfig t;
  if (entry.is_string()) {
    t.kind = parse_solver_kind(entry.get<std::string>());
    return t;
  }
  if (!entry.is_object() || !entry.contains("kind")) config_error("solver entries must be names or {\"kind\": ...}");
  t.kind = parse_solver_kind(entry.at("kind").get<std::string>());
  if (entry.contains("tau") && !entry.at("tau").is_null()) t.tau = entry.at("tau").get<double>();
  if (entry.contains("grad_tol")) t.grad_tol = entry.at("grad_tol").get<double>();
  if (entry.contains("bound_G") && !entry.at("bound_G").is_null()) t.bound_G = entry.at("bound_G").get<double>();
  return t;
}

// Data shared by every cell of one (rho, seed) pair.
struct PreparedData {
  double rho = 0.0;
  std::uint64_t seed = 0;
  MaskedDataset dataset;
  SimilarityMatrix s0;
  std::string error;
  std::exception_ptr failure;
};

struct Cell {
  std::size_t prepared = 0;  // index into the prepared data
  SolverConfig cfg;
};

DenseMatrix load_data(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.n_search + cfg.n_query;
  if (const auto* syn = std::get_if<SyntheticSpec>(&cfg.dataset)) {
    return generate_synthetic(cfg.n_search, cfg.n_query, syn->d, syn->latent_rank, syn->noise_sigma, syn->seed);
  }
  const auto& path = std::get<std::filesystem::path>(cfg.dataset);
  DenseMatrix all = drop_zero_rows(load_matrix_csv(path));
  if (all.rows() < n) {
    config_error(path.string() + " has " + std::to_string(all.rows()) + " nonzero rows, need " + std::to_string(n));
  }
  std::vector<double> head(all.data().begin(), all.data().begin() + static_cast<std::ptrdiff_t>(n * all.cols()));
  return DenseMatrix(n, all.cols(), std::move(head));
}

PreparedData prepare(const ExperimentConfig& cfg, const DenseMatrix& x, double rho, std::uint64_t seed) {
  PreparedData p;
  p.rho = rho;
  p.seed = seed;
  try {
    const MaskSpec spec{rho, splitmix64(seed ^ splitmix64(std::bit_cast<std::uint64_t>(rho)))};
    p.dataset.x = x;
    p.dataset.n_search = cfg.n_search;
    p.dataset.n_query = cfg.n_query;
    p.dataset.epsilon = cfg.epsilon;
    p.dataset.allow_search_missing = cfg.mask_search_rows;
    if (cfg.mask_search_rows) {
      p.dataset.mask = generate_mask(x.rows(), x.cols(), spec);
    } else {
      p.dataset.mask =
          ObservationMask::vstack(ObservationMask(cfg.n_search, x.cols()), generate_mask(cfg.n_query, x.cols(), spec));
    }
    p.s0 = initial_similarity(p.dataset);
  } catch (const Error& e) {
    p.error = e.what();
    p.failure = std::current_exception();
  }
  return p;
}

ExperimentResult run_cell(const ExperimentConfig& cfg, const Cell& cell, const PreparedData& data,
                          const SimilarityMatrix& s_star, const RunOptions& opts) {
  ExperimentResult row;
  row.dataset = cfg.dataset_name;
  row.solver = std::string(to_string(cell.cfg.kind));
  row.n_search = cfg.n_search;
  row.n_query = cfg.n_query;
  row.d = data.dataset.x.cols();
  row.rho = data.rho;
  row.rank = cell.cfg.r;
  row.lambda = cell.cfg.lambda;
  row.gamma = cell.cfg.gamma;
  row.seed = data.seed;
  row.rmse = row.recall = row.ndcg = kNaN;
  row.total_seconds = row.seconds_per_iter = kNaN;
  if (!data.error.empty()) {
    row.error = data.error;
    return row;
  }

  SimilarityMatrix estimate;
  try {
    std::int64_t nanos = 0;
    switch (cell.cfg.kind) {
      case SolverKind::SMCNN:
      case SolverKind::SMCNMF:
      case SolverKind::SMC_F:
      case SolverKind::SMC_NR: {
        auto sol = solve_factorized(data.s0, cell.cfg);
        estimate = std::move(sol.estimate);
        row.iters = sol.trace.iterations;
        nanos = sol.trace.total_nanos;
        break;
      }
      case SolverKind::SMC_GD: {
        auto sol = solve_smc_gd(data.s0, cell.cfg);
        estimate = std::move(sol.estimate);
        row.iters = sol.trace.iterations;
        nanos = sol.trace.total_nanos;
        break;
      }
      case SolverKind::MC_ON:
      case SolverKind::MC_FON: {
        auto sol = cell.cfg.kind == SolverKind::MC_ON ? solve_mc_on(data.s0, cell.cfg) : solve_mc_fon(data.s0, cell.cfg);
        estimate = std::move(sol.estimate);
        row.iters = sol.trace.iterations;
        nanos = sol.trace.total_nanos;
        break;
      }
      case SolverKind::MEAN_IMPUTE: {
        const auto start = std::chrono::steady_clock::now();
        estimate = mean_impute_similarity(data.dataset);
        nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
        row.iters = 0;
        break;
      }
    }
    row.total_seconds = static_cast<double>(nanos) * 1e-9;
    row.seconds_per_iter = row.total_seconds / static_cast<double>(std::max<std::size_t>(row.iters, 1));
  } catch (const Error& e) {
    row.error = e.what();
    return row;
  }

  try {
    row.recall = recall_at_topk(estimate, s_star, cfg.n_search, cfg.n_query, cfg.k_fraction, opts.scope);
    row.ndcg = ndcg_at_topk(estimate, s_star, cfg.n_search, cfg.n_query, cfg.k_fraction, opts.scope);
    row.rank_hat = rank_report(estimate);
    row.rmse = rmse(estimate, s_star, data.s0);
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_name.empty()) config_error("dataset name must be nonempty");
  if (dataset_name.find_first_of(",\"\n") != std::string::npos) config_error("dataset name may not contain , \" or newlines");
  if (n_search < 1 || n_query < 1) config_error("n_search and n_query must be positive");
  if (rho_list.empty() || solver_list.empty() || r_list.empty() || lambda_list.empty() || gamma_list.empty() ||
      seeds.empty()) {
    config_error("every grid list (rho, solvers, r, lambda, gamma, seeds) must be nonempty");
  }
  for (double rho : rho_list)
    if (!(rho >= 0.0 && rho < 1.0)) config_error("rho entries must lie in [0, 1)");
  for (double l : lambda_list)
    if (!(l >= 0.0)) config_error("lambda entries must be nonnegative");
  for (double g : gamma_list)
    if (!(g > 0.0)) config_error("gamma entries must be positive");
  for (std::size_t r : r_list)
    if (r < 1) config_error("r entries must be positive");
  if (iters < 1) config_error("iters must be at least 1");
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) config_error("k_fraction must lie in (0, 1]");
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) config_error("epsilon must lie in (0, 1e-3]");
  if (!(grad_tol >= 0.0)) config_error("grad_tol must be nonnegative");
  if (const auto* syn = std::get_if<SyntheticSpec>(&dataset)) {
    if (syn->d < 1) config_error("synthetic d must be positive");
    if (syn->latent_rank < 1) config_error("synthetic latent_rank must be positive");
  }
}

std::size_t ExperimentConfig::cell_count() const {
  return solver_list.size() * rho_list.size() * r_list.size() * lambda_list.size() * gamma_list.size() *
         seeds.size();
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  ExperimentConfig cfg;
  try {
    if (!doc.contains("dataset") || !doc.at("dataset").is_object()) config_error("missing 'dataset' object");
    const json& ds = doc.at("dataset");
    if (ds.contains("synthetic")) {
      const json& syn = ds.at("synthetic");
      SyntheticSpec spec;
      spec.d = syn.at("d").get<std::size_t>();
      spec.latent_rank = syn.at("latent_rank").get<std::size_t>();
      spec.noise_sigma = syn.value("noise_sigma", 0.0);
      spec.seed = syn.value("seed", std::uint64_t{0});
      cfg.dataset = spec;
      cfg.dataset_name = ds.value("name", std::string("synthetic"));
    } else if (ds.contains("csv_path")) {
      std::filesystem::path p = ds.at("csv_path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.dataset = p;
      cfg.dataset_name = ds.value("name", p.stem().string());
    } else {
      config_error("dataset needs either 'synthetic' or 'csv_path'");
    }

    cfg.n_search = doc.at("n_search").get<std::size_t>();
    cfg.n_query = doc.at("n_query").get<std::size_t>();
    cfg.rho_list = number_list<double>(doc, "rho");
    if (!doc.contains("solvers") || !doc.at("solvers").is_array()) config_error("'solvers' must be an array");
    for (const auto& e : doc.at("solvers")) cfg.solver_list.push_back(solver_template(e));
    cfg.r_list = number_list<std::size_t>(doc, "r");
    cfg.lambda_list = number_list<double>(doc, "lambda");
    cfg.gamma_list = number_list<double>(doc, "gamma");
    cfg.iters = doc.value("iters", cfg.iters);
    if (doc.contains("seeds")) cfg.seeds = number_list<std::uint64_t>(doc, "seeds");
    cfg.k_fraction = doc.value("k_fraction", cfg.k_fraction);
    cfg.epsilon = doc.value("epsilon", cfg.epsilon);
    cfg.grad_tol = doc.value("grad_tol", cfg.grad_tol);
    cfg.mask_search_rows = doc.value("mask_search_rows", false);
  } catch (const json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    config_error(e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

CellInputs cell_inputs(const ExperimentConfig& cfg, double rho, std::uint64_t seed) {
  cfg.validate();
  const DenseMatrix x = load_data(cfg);
  PreparedData p = prepare(cfg, x, rho, seed);
  if (p.failure) std::rethrow_exception(p.failure);
  return {std::move(p.dataset), std::move(p.s0), true_similarity(x, cfg.epsilon)};
}

std::vector<ExperimentResult> run_grid(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const DenseMatrix x = load_data(cfg);
  const SimilarityMatrix s_star = true_similarity(x, cfg.epsilon);
  spdlog::info("dataset '{}': {} rows x {} features, {} cells", cfg.dataset_name, x.rows(), x.cols(),
               cfg.cell_count());

  std::vector<PreparedData> prepared;
  prepared.reserve(cfg.rho_list.size() * cfg.seeds.size());
  for (double rho : cfg.rho_list)
    for (std::uint64_t seed : cfg.seeds) prepared.push_back(prepare(cfg, x, rho, seed));

  std::vector<Cell> cells;
  cells.reserve(cfg.cell_count());
  for (const SolverConfig& tmpl : cfg.solver_list) {
    for (std::size_t ri = 0; ri < cfg.rho_list.size(); ++ri) {
      for (std::size_t r : cfg.r_list) {
        for (double lambda : cfg.lambda_list) {
          for (double gamma : cfg.gamma_list) {
            for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
              Cell cell;
              cell.prepared = ri * cfg.seeds.size() + si;
              cell.cfg = tmpl;
              cell.cfg.r = r;
              cell.cfg.lambda = lambda;
              cell.cfg.gamma = gamma;
              cell.cfg.iters = cfg.iters;
              cell.cfg.seed = cfg.seeds[si];
              if (cell.cfg.grad_tol == 0.0) cell.cfg.grad_tol = cfg.grad_tol;
              cell.cfg.trace_stride = opts.trace_stride;
              cells.push_back(cell);
            }
          }
        }
      }
    }
  }

  std::vector<ExperimentResult> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      const Cell& cell = cells[i];
      const PreparedData& data = prepared[cell.prepared];
      rows[i] = run_cell(cfg, cell, data, s_star, opts);
      const auto& row = rows[i];
      if (row.error.empty()) {
        spdlog::info("[{}/{}] {} rho={} r={} seed={}: rmse={:.4f} recall={:.4f} ndcg={:.4f} rank={} ({:.2f}s)", i + 1,
                     cells.size(), row.solver, row.rho, row.rank, row.seed, row.rmse, row.recall, row.ndcg,
                     row.rank_hat.value_or(0), row.total_seconds);
      } else {
        spdlog::warn("[{}/{}] {} rho={} r={} seed={}: {}", i + 1, cells.size(), row.solver, row.rho, row.rank,
                     row.seed, row.error);
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return rows;
}

}  // namespace smc
