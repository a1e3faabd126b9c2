#include "smc/solvers.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "smc/error.hpp"

namespace smc {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kZeroGramNorm = 1e-12;

constexpr std::array<std::pair<SolverKind, std::string_view>, 8> kKindNames{{
    {SolverKind::SMCNN, "SMCNN"},
    {SolverKind::SMCNMF, "SMCNMF"},
    {SolverKind::SMC_F, "SMC_F"},
    {SolverKind::SMC_NR, "SMC_NR"},
    {SolverKind::SMC_GD, "SMC_GD"},
    {SolverKind::MC_ON, "MC_ON"},
    {SolverKind::MC_FON, "MC_FON"},
    {SolverKind::MEAN_IMPUTE, "MEAN_IMPUTE"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

void require_square_match(const DenseMatrix& v, const SimilarityMatrix& s0) {
  if (v.rows() != s0.n()) {
    throw Error(ErrorKind::DimensionMismatch, "factor has " + std::to_string(v.rows()) + " rows but S0 is " +
                                                  std::to_string(s0.n()) + "x" + std::to_string(s0.n()));
  }
}

void axpy(double alpha, const DenseMatrix& x, DenseMatrix& y) {
  const auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}

bool finite(double x) { return std::isfinite(x); }

// Scratch buffers reused across iterations of one solve.
struct Workspace {
  DenseMatrix residual;  // VVᵀ − S⁰, n×n
  DenseMatrix vtv;       // VᵀV, r×r
  DenseMatrix tmp;       // n×r
};

struct Evaluation {
  double objective = 0.0;
  DenseMatrix gradient;
};

// Objective and gradient of a Gram-factor kind at V. SMC_GD only has the fit
// term differentiated; its nuclear norm is handled by the proximal step.
void evaluate(SolverKind kind, const DenseMatrix& v, const SimilarityMatrix& s0, double lambda, Workspace& ws,
              Evaluation& out) {
  require_square_match(v, s0);
  multiply_nt_into(v, v, ws.residual);
  ws.residual -= s0.matrix();
  const double fit = frobenius_norm_sq(ws.residual);

  multiply_into(ws.residual, v, out.gradient);
  out.gradient *= 4.0;

  switch (kind) {
    case SolverKind::SMCNN:
      out.objective = fit + lambda * frobenius_norm_sq(v);
      axpy(2.0 * lambda, v, out.gradient);
      break;
    case SolverKind::SMCNMF: {
      multiply_tn_into(v, v, ws.vtv);
      const double gram_norm = frobenius_norm(ws.vtv);  // ‖VVᵀ‖_F = ‖VᵀV‖_F
      out.objective = fit + lambda * (frobenius_norm_sq(v) - gram_norm);
      axpy(2.0 * lambda, v, out.gradient);
      if (gram_norm >= kZeroGramNorm && lambda != 0.0) {
        multiply_into(v, ws.vtv, ws.tmp);
        axpy(-2.0 * lambda / gram_norm, ws.tmp, out.gradient);
      }
      break;
    }
    case SolverKind::SMC_F:
      multiply_tn_into(v, v, ws.vtv);
      out.objective = fit + 0.5 * lambda * frobenius_norm_sq(ws.vtv);
      if (lambda != 0.0) {
        multiply_into(v, ws.vtv, ws.tmp);
        axpy(2.0 * lambda, ws.tmp, out.gradient);
      }
      break;
    case SolverKind::SMC_NR:
      out.objective = fit;
      break;
    case SolverKind::SMC_GD:
      out.objective = fit + lambda * frobenius_norm_sq(v);  // ‖VVᵀ‖_* = ‖V‖²_F
      break;
    default:
      throw Error(ErrorKind::InvalidArgument, std::string("not a Gram-factor solver: ") + std::string(to_string(kind)));
  }
}

class TraceRecorder {
 public:
  explicit TraceRecorder(std::size_t stride, std::size_t expected_iters) {
    trace_.stride = stride;
    trace_.wall_nanos_per_iter.reserve(expected_iters);
  }

  bool due(std::size_t iter) const { return iter % trace_.stride == 0; }

  void objective(std::size_t iter, double value) {
    if (!trace_.objective_iters.empty() && trace_.objective_iters.back() == iter) return;
    trace_.objective.push_back(value);
    trace_.objective_iters.push_back(iter);
  }
  void grad(std::size_t iter, double norm_sq) {
    trace_.grad_norm_sq.push_back(norm_sq);
    trace_.grad_iters.push_back(iter);
  }
  void step_change(double value) { trace_.step_change.push_back(value); }
  void factor_norm(double norm) { trace_.max_factor_norm = std::max(trace_.max_factor_norm, norm); }
  void iteration_done(Clock::time_point start) {
    trace_.wall_nanos_per_iter.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
    ++trace_.iterations;
  }

  ConvergenceTrace finish(Clock::time_point solve_start) {
    trace_.total_nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - solve_start).count();
    return std::move(trace_);
  }

 private:
  ConvergenceTrace trace_;
};

[[noreturn]] void diverged(std::size_t iter, double objective) {
  throw Error(ErrorKind::Diverged, "objective became non-finite (" + std::to_string(objective) + ") at iteration " +
                                       std::to_string(iter) + "; the stepsize is likely too large");
}

void require_kind(const SolverConfig& cfg, std::initializer_list<SolverKind> allowed, const char* who) {
  cfg.validate();
  if (std::find(allowed.begin(), allowed.end(), cfg.kind) == allowed.end()) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(who) + " does not handle solver kind " + std::string(to_string(cfg.kind)));
  }
}

void normalize_column_signs(DenseMatrix& m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double x = m(i, j);
      if (std::abs(x) <= 1e-12) continue;
      if (x < 0) {
        for (std::size_t k = 0; k < m.rows(); ++k) m(k, j) = -m(k, j);
      }
      break;
    }
  }
}

FactorMatrix random_factor(std::size_t n, std::size_t r, std::mt19937_64& rng) {
  if (r < 1 || r >= n) {
    throw Error(ErrorKind::InvalidRank, "factor rank r=" + std::to_string(r) + " must satisfy 1 <= r < n=" +
                                            std::to_string(n));
  }
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(r)));
  DenseMatrix v(n, r);
  for (double& x : v.data()) x = normal(rng);
  return FactorMatrix(std::move(v));
}

}  // namespace

std::string_view to_string(SolverKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "UNKNOWN";
}

SolverKind parse_solver_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (iequals(name, n)) return k;
  if (iequals(name, "MEAN")) return SolverKind::MEAN_IMPUTE;
  throw Error(ErrorKind::InvalidArgument, "unknown solver kind '" + std::string(name) + "'");
}

bool is_factorized(SolverKind kind) {
  switch (kind) {
    case SolverKind::SMCNN:
    case SolverKind::SMCNMF:
    case SolverKind::SMC_F:
    case SolverKind::SMC_NR:
    case SolverKind::SMC_GD:
      return true;
    default:
      return false;
  }
}

void SolverConfig::validate() const {
  if (r < 1) throw Error(ErrorKind::InvalidRank, "r must be at least 1");
  if (!(gamma > 0.0) || !finite(gamma)) throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (!(lambda >= 0.0) || !finite(lambda)) throw Error(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  if (iters < 1) throw Error(ErrorKind::InvalidArgument, "iters must be at least 1");
  if (tau && (!(*tau >= 0.0) || !finite(*tau))) throw Error(ErrorKind::InvalidArgument, "tau must be nonnegative");
  if (!(grad_tol >= 0.0)) throw Error(ErrorKind::InvalidArgument, "grad_tol must be nonnegative");
  if (trace_stride < 1) throw Error(ErrorKind::InvalidArgument, "trace_stride must be at least 1");
  if (bound_G && !(*bound_G > 0.0)) throw Error(ErrorKind::InvalidBound, "bound_G must be positive");
}

double ConvergenceTrace::min_grad_norm_sq(std::size_t first_n_iterates) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grad_norm_sq.size(); ++k)
    if (grad_iters[k] < first_n_iterates) best = std::min(best, grad_norm_sq[k]);
  return best;
}

FactorMatrix::FactorMatrix(DenseMatrix v) : v_(std::move(v)) {
  if (v_.cols() < 1 || v_.cols() >= v_.rows()) {
    throw Error(ErrorKind::InvalidRank, "factor rank r=" + std::to_string(v_.cols()) +
                                            " must satisfy 1 <= r < n=" + std::to_string(v_.rows()));
  }
  if (!v_.all_finite()) throw Error(ErrorKind::NonFinite, "factor contains NaN or Inf");
}

FactorMatrix init_factor(std::size_t n, std::size_t r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_factor(n, r, rng);
}

double factor_objective(SolverKind kind, const DenseMatrix& v, const SimilarityMatrix& s0, double lambda) {
  Workspace ws;
  Evaluation ev;
  evaluate(kind, v, s0, lambda, ws, ev);
  return ev.objective;
}

DenseMatrix factor_gradient(SolverKind kind, const DenseMatrix& v, const SimilarityMatrix& s0, double lambda) {
  Workspace ws;
  Evaluation ev;
  evaluate(kind, v, s0, lambda, ws, ev);
  return std::move(ev.gradient);
}

DenseMatrix grad_smcnn(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda) {
  return factor_gradient(SolverKind::SMCNN, v, s0, lambda);
}

DenseMatrix grad_smcnmf(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda) {
  return factor_gradient(SolverKind::SMCNMF, v, s0, lambda);
}

DenseMatrix grad_smc_f(const DenseMatrix& v, const SimilarityMatrix& s0, double lambda) {
  return factor_gradient(SolverKind::SMC_F, v, s0, lambda);
}

DenseMatrix grad_smc_nr(const DenseMatrix& v, const SimilarityMatrix& s0) {
  return factor_gradient(SolverKind::SMC_NR, v, s0, 0.0);
}

std::pair<DenseMatrix, DenseMatrix> mc_fon_gradients(const DenseMatrix& w, const DenseMatrix& h,
                                                     const SimilarityMatrix& s0) {
  require_square_match(w, s0);
  require_square_match(h, s0);
  if (w.cols() != h.cols()) throw Error(ErrorKind::DimensionMismatch, "W and H have different widths");
  DenseMatrix residual = multiply_nt(w, h);
  residual -= s0.matrix();
  DenseMatrix gw = multiply(residual, h);
  DenseMatrix gh = multiply_tn(residual, w);
  gw *= 2.0;
  gh *= 2.0;
  return {std::move(gw), std::move(gh)};
}

FactorizedSolution solve_factorized(const SimilarityMatrix& s0, const SolverConfig& cfg) {
  require_kind(cfg, {SolverKind::SMCNN, SolverKind::SMCNMF, SolverKind::SMC_F, SolverKind::SMC_NR},
               "solve_factorized");
  return solve_factorized(s0, cfg, init_factor(s0.n(), cfg.r, cfg.seed));
}

FactorizedSolution solve_factorized(const SimilarityMatrix& s0, const SolverConfig& cfg, FactorMatrix start) {
  require_kind(cfg, {SolverKind::SMCNN, SolverKind::SMCNMF, SolverKind::SMC_F, SolverKind::SMC_NR},
               "solve_factorized");
  if (start.n() != s0.n()) throw Error(ErrorKind::DimensionMismatch, "start factor does not match S0");

  const auto solve_start = Clock::now();
  DenseMatrix v = start.matrix();
  Workspace ws;
  Evaluation ev;
  TraceRecorder rec(cfg.trace_stride, cfg.iters);
  rec.factor_norm(frobenius_norm(v));

  std::size_t iter = 0;  // index of the current iterate Vⁱᵗᵉʳ
  for (; iter < cfg.iters; ++iter) {
    const auto t0 = Clock::now();
    evaluate(cfg.kind, v, s0, cfg.lambda, ws, ev);
    if (!finite(ev.objective)) diverged(iter, ev.objective);
    const double gnorm_sq = frobenius_norm_sq(ev.gradient);
    if (!finite(gnorm_sq)) diverged(iter, gnorm_sq);
    if (rec.due(iter)) {
      rec.objective(iter, ev.objective);
      rec.grad(iter, gnorm_sq);
    }
    if (cfg.grad_tol > 0.0 && std::sqrt(gnorm_sq) <= cfg.grad_tol) {
      rec.objective(iter, ev.objective);
      break;
    }
    axpy(-cfg.gamma, ev.gradient, v);
    rec.factor_norm(frobenius_norm(v));
    rec.iteration_done(t0);
  }
  if (iter == cfg.iters) {
    evaluate(cfg.kind, v, s0, cfg.lambda, ws, ev);
    if (!finite(ev.objective) || !v.all_finite()) diverged(iter, ev.objective);
    rec.objective(iter, ev.objective);
  }

  SimilarityMatrix estimate = gram(v);
  return {FactorMatrix(std::move(v)), std::move(estimate), rec.finish(solve_start)};
}

DenseMatrix shrink_factor_spectrum(const DenseMatrix& v, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be nonnegative");
  // VVᵀ = (VQ)(VQ)ᵀ with VᵀV = QMQᵀ; the columns of VQ are orthogonal with
  // squared norms M, so scaling column i by √(max(mᵢ − τ, 0)/mᵢ) shrinks the
  // nonzero spectrum of VVᵀ exactly.
  const auto inner = sym_eigendecompose(SimilarityMatrix(multiply_tn(v, v)));
  DenseMatrix rotated = multiply(v, inner.eigenvectors);
  for (std::size_t j = 0; j < rotated.cols(); ++j) {
    const double m = inner.eigenvalues[j];
    const double scale = (m > 0.0 && m > tau) ? std::sqrt((m - tau) / m) : 0.0;
    for (std::size_t i = 0; i < rotated.rows(); ++i) rotated(i, j) *= scale;
  }
  normalize_column_signs(rotated);
  return rotated;
}

SimilarityMatrix soft_threshold_spectrum(const SimilarityMatrix& s, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be nonnegative");
  auto eig = sym_eigendecompose(s);
  for (double& l : eig.eigenvalues) l = std::max(l - tau, 0.0);
  return gram(factor_from_eigen(eig, s.n()));
}

FactorizedSolution solve_smc_gd(const SimilarityMatrix& s0, const SolverConfig& cfg) {
  require_kind(cfg, {SolverKind::SMC_GD}, "solve_smc_gd");
  const double threshold = cfg.tau.value_or(cfg.gamma * cfg.lambda);

  const auto solve_start = Clock::now();
  DenseMatrix v = init_factor(s0.n(), cfg.r, cfg.seed).matrix();
  Workspace ws;
  Evaluation ev;
  TraceRecorder rec(cfg.trace_stride, cfg.iters);
  rec.factor_norm(frobenius_norm(v));

  std::size_t iter = 0;
  for (; iter < cfg.iters; ++iter) {
    const auto t0 = Clock::now();
    evaluate(SolverKind::SMC_GD, v, s0, cfg.lambda, ws, ev);
    if (!finite(ev.objective)) diverged(iter, ev.objective);
    const double gnorm_sq = frobenius_norm_sq(ev.gradient);
    if (!finite(gnorm_sq)) diverged(iter, gnorm_sq);
    if (rec.due(iter)) {
      rec.objective(iter, ev.objective);
      rec.grad(iter, gnorm_sq);
    }
    if (cfg.grad_tol > 0.0 && std::sqrt(gnorm_sq) <= cfg.grad_tol) {
      rec.objective(iter, ev.objective);
      break;
    }
    axpy(-cfg.gamma, ev.gradient, v);
    if (!v.all_finite()) diverged(iter + 1, std::numeric_limits<double>::quiet_NaN());
    v = shrink_factor_spectrum(v, threshold);
    rec.factor_norm(frobenius_norm(v));
    rec.iteration_done(t0);
  }
  if (iter == cfg.iters) {
    evaluate(SolverKind::SMC_GD, v, s0, cfg.lambda, ws, ev);
    if (!finite(ev.objective)) diverged(iter, ev.objective);
    rec.objective(iter, ev.objective);
  }

  SimilarityMatrix estimate = gram(v);
  return {FactorMatrix(std::move(v)), std::move(estimate), rec.finish(solve_start)};
}

MatrixSolution solve_mc_on(const SimilarityMatrix& s0, const SolverConfig& cfg) {
  require_kind(cfg, {SolverKind::MC_ON}, "solve_mc_on");
  const double floor_value = cfg.tau.value_or(kDefaultMcOnTau);

  const auto solve_start = Clock::now();
  TraceRecorder rec(cfg.trace_stride, cfg.iters);
  SimilarityMatrix current = s0;

  for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
    const auto t0 = Clock::now();
    auto eig = sym_eigendecompose(current);
    if (iter == 0) {
      double nuclear = 0.0;
      for (double l : eig.eigenvalues) nuclear += std::abs(l);
      rec.objective(0, cfg.lambda * nuclear);
    }
    double nuclear = 0.0;
    for (double& l : eig.eigenvalues) {
      l = std::max(l, floor_value);
      nuclear += l;
    }
    SimilarityMatrix next = gram(factor_from_eigen(eig, current.n()));
    const double change = frobenius_distance(next.matrix(), current.matrix());
    current = std::move(next);
    rec.step_change(change);
    const double dist = frobenius_distance(current.matrix(), s0.matrix());
    if (rec.due(iter + 1) || iter + 1 == cfg.iters) rec.objective(iter + 1, dist * dist + cfg.lambda * nuclear);
    rec.iteration_done(t0);
    if (cfg.grad_tol > 0.0 && change <= cfg.grad_tol) {
      rec.objective(iter + 1, dist * dist + cfg.lambda * nuclear);
      break;
    }
  }
  return {std::move(current), rec.finish(solve_start)};
}

MatrixSolution solve_mc_fon(const SimilarityMatrix& s0, const SolverConfig& cfg) {
  require_kind(cfg, {SolverKind::MC_FON}, "solve_mc_fon");

  const auto solve_start = Clock::now();
  std::mt19937_64 rng(cfg.seed);
  DenseMatrix w = random_factor(s0.n(), cfg.r, rng).matrix();
  DenseMatrix h = random_factor(s0.n(), cfg.r, rng).matrix();
  DenseMatrix residual;
  DenseMatrix gw;
  DenseMatrix gh;
  TraceRecorder rec(cfg.trace_stride, cfg.iters);
  auto joint_norm = [&] { return std::sqrt(frobenius_norm_sq(w) + frobenius_norm_sq(h)); };
  rec.factor_norm(joint_norm());

  auto fit = [&] {
    multiply_nt_into(w, h, residual);
    residual -= s0.matrix();
    return frobenius_norm_sq(residual);
  };

  std::size_t iter = 0;
  for (; iter < cfg.iters; ++iter) {
    const auto t0 = Clock::now();
    const double objective = fit();
    if (!finite(objective)) diverged(iter, objective);
    multiply_into(residual, h, gw);
    multiply_tn_into(residual, w, gh);
    gw *= 2.0;
    gh *= 2.0;
    const double gnorm_sq = frobenius_norm_sq(gw) + frobenius_norm_sq(gh);
    if (!finite(gnorm_sq)) diverged(iter, gnorm_sq);
    if (rec.due(iter)) {
      rec.objective(iter, objective);
      rec.grad(iter, gnorm_sq);
    }
    if (cfg.grad_tol > 0.0 && std::sqrt(gnorm_sq) <= cfg.grad_tol) {
      rec.objective(iter, objective);
      break;
    }
    axpy(-cfg.gamma, gw, w);
    axpy(-cfg.gamma, gh, h);
    rec.factor_norm(joint_norm());
    rec.iteration_done(t0);
  }
  if (iter == cfg.iters) {
    const double objective = fit();
    if (!finite(objective)) diverged(iter, objective);
    rec.objective(iter, objective);
  }
  return {SimilarityMatrix(multiply_nt(w, h)), rec.finish(solve_start)};
}

SimilarityMatrix mean_impute_similarity(const MaskedDataset& ds) {
  ds.validate();
  const std::size_t d = ds.x.cols();
  std::vector<double> means(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.n_search; ++i) {
      if (!ds.mask.observed(i, j)) continue;
      sum += ds.x(i, j);
      ++count;
    }
    if (count == 0) {
      throw Error(ErrorKind::EmptyFeature, "feature " + std::to_string(j) + " has no observed search-row values");
    }
    means[j] = sum / static_cast<double>(count);
  }
  DenseMatrix filled = ds.x;
  for (std::size_t i = 0; i < filled.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (!ds.mask.observed(i, j)) filled(i, j) = means[j];
  return true_similarity(filled, ds.epsilon);
}

double stepsize_from_theorem(double bound_G, double lambda) {
  if (!(bound_G > 0.0) || !finite(bound_G)) throw Error(ErrorKind::InvalidBound, "G must be positive and finite");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  return 1.0 / (6.0 * bound_G * bound_G + lambda);
}

TheoremStepRun solve_with_theorem_stepsize(const SimilarityMatrix& s0, const SolverConfig& cfg) {
  SolverConfig run = cfg;
  run.gamma = 1.0;  // placeholder so validation passes before the real stepsize is known
  run.validate();
  const FactorMatrix start = init_factor(s0.n(), cfg.r, cfg.seed);

  TheoremStepRun out;
  out.bound_G = cfg.bound_G.value_or(frobenius_norm(start.matrix()));
  run.gamma = stepsize_from_theorem(out.bound_G, cfg.lambda);
  out.solution = solve_factorized(s0, run, start);
  out.measured_G = out.solution.trace.max_factor_norm;
  if (out.measured_G > out.bound_G) {
    out.rerun = true;
    out.bound_G = out.measured_G;
    run.gamma = stepsize_from_theorem(out.bound_G, cfg.lambda);
    out.solution = solve_factorized(s0, run, start);
    out.measured_G = out.solution.trace.max_factor_norm;
  }
  return out;
}

}  // namespace smc
