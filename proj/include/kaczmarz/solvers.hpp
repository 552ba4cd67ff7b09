#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/greedy.hpp"
#include "kaczmarz/linear_system.hpp"
#include "kaczmarz/rng.hpp"

namespace kaczmarz {

enum class Variant { Rk, Grk, Mirk, Gmirk, Oblique };

inline Variant variant_from_name(std::string_view name) {
  if (name == "rk") return Variant::Rk;
  if (name == "grk") return Variant::Grk;
  if (name == "mirk") return Variant::Mirk;
  if (name == "gmirk") return Variant::Gmirk;
  if (name == "oblique") return Variant::Oblique;
  throw ConfigError("unknown solver variant: " + std::string(name));
}

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Rk: return "rk";
    case Variant::Grk: return "grk";
    case Variant::Mirk: return "mirk";
    case Variant::Gmirk: return "gmirk";
    case Variant::Oblique: return "oblique";
  }
  return "?";
}

inline bool is_greedy(Variant v) {
  return v == Variant::Grk || v == Variant::Gmirk || v == Variant::Oblique;
}

inline bool is_inertial(Variant v) {
  return v == Variant::Mirk || v == Variant::Gmirk || v == Variant::Oblique;
}

enum class StoppingRule { Rse, Residual };

struct RunConfig {
  Variant variant = Variant::Gmirk;
  std::size_t max_iters = 1000000;
  double rse_tol = 1e-12;
  std::uint64_t seed = 0;
  ProbabilityRule rule = ProbabilityRule::ResidualWeighted;
  std::size_t residual_refresh_period = 50;
  StoppingRule stopping = StoppingRule::Rse;
  bool retain_iterates = false;
  bool record_trace = true;  // off: keep only counters (cheap long sweeps)
  std::vector<double> x0;                   // empty means zeros
  std::vector<std::size_t> forced_indices;  // overrides sampling while any remain
};

struct SolverState {
  std::vector<double> x;
  std::size_t k = 0;
  std::optional<std::size_t> prev_index;
  std::vector<double> r;  // Ax - b
};

template <RowMatrix M>
SolverState make_state(const LinearSystem<M>& sys, std::vector<double> x0 = {}) {
  SolverState s;
  s.x = x0.empty() ? std::vector<double>(sys.cols(), 0.0) : std::move(x0);
  if (s.x.size() != sys.cols())
    throw DimensionMismatchError("x0 length does not match column count");
  s.r = residual(sys, s.x);
  return s;
}

struct StepOutcome {
  SelectionRecord selection;
  double beta = 0.0;       // 0 at k = 0 and for non-inertial variants
  double step_norm = 0.0;  // ||x^{k+1} - x^k||_2
};

// The relative guard on the 2x2 Gram determinant
//   D = ||a_i||^2 ||a_j||^2 - <a_i, a_j>^2.
// Below it the two rows are treated as parallel.
inline constexpr double kNearParallelGuard = 1e-12;

namespace detail {

// beta of the inertial extrapolation, or nullopt when the pair is within the
// near-parallel guard and the caller should fall back to a plain projection.
inline std::optional<double> inertial_beta_guarded(double dot, double nsq_ik,
                                                   double nsq_prev,
                                                   double r_ik) {
  const double scale = nsq_ik * nsq_prev;
  const double det = scale - dot * dot;
  if (det <= kNearParallelGuard * scale) return std::nullopt;
  return dot * r_ik / det;
}

}  // namespace detail

// beta_k = <a_ik, a_prev> (a_ik^T x - b_ik) / (||a_ik||^2 ||a_prev||^2 -
// <a_ik, a_prev>^2), the extrapolation length that lands the projected point
// on both working hyperplanes.
inline double gmirk_beta(double dot, double nsq_ik, double nsq_prev,
                         double r_ik) {
  auto beta = detail::inertial_beta_guarded(dot, nsq_ik, nsq_prev, r_ik);
  if (!beta)
    throw NearParallelRowsError("inertial denominator within parallel guard");
  return *beta;
}

inline double gmirk_beta(std::span<const double> a_ik,
                         std::span<const double> a_prev, double r_ik) {
  double dot = 0.0, nik = 0.0, nprev = 0.0;
  for (std::size_t j = 0; j < a_ik.size(); ++j) {
    dot += a_ik[j] * a_prev[j];
    nik += a_ik[j] * a_ik[j];
    nprev += a_prev[j] * a_prev[j];
  }
  return gmirk_beta(dot, nik, nprev, r_ik);
}

// Least-change point satisfying rows i and j exactly:
//   argmin ||z - x||_2  s.t.  a_i^T z = b_i, a_j^T z = b_j,
// via the 2x2 Gram system. This is the sketch-and-project update with the
// two-coordinate sketch and serves as the independent oracle for the
// inertial and oblique steps.
template <RowMatrix M>
std::vector<double> sketch2_project(std::span<const double> x,
                                    const LinearSystem<M>& sys, std::size_t i,
                                    std::size_t j) {
  if (x.size() != sys.cols())
    throw DimensionMismatchError("x length does not match column count");
  const double nii = sys.row_sq_norms()[i];
  const double njj = sys.row_sq_norms()[j];
  const double gij = i == j ? nii : sys.matrix().rows_dot(i, j);
  const double det = nii * njj - gij * gij;
  if (det <= kNearParallelGuard * nii * njj)
    throw NearParallelRowsError("rows " + std::to_string(i) + ", " +
                                std::to_string(j) +
                                " give a singular 2x2 Gram system");
  const double ci = sys.rhs()[i] - sys.matrix().row_dot(i, x);
  const double cj = sys.rhs()[j] - sys.matrix().row_dot(j, x);
  const double li = (njj * ci - gij * cj) / det;
  const double lj = (nii * cj - gij * ci) / det;
  std::vector<double> z(x.begin(), x.end());
  sys.matrix().add_scaled_row(i, li, z);
  sys.matrix().add_scaled_row(j, lj, z);
  return z;
}

namespace detail {

// One fused x-update x += c_prev a_prev + c_ik a_ik. Covers the plain
// projection (c_prev = 0), the inertial Steps 4-6, and the oblique step,
// which only differ in how the two coefficients are derived.
struct UpdateCoeffs {
  double c_ik = 0.0;
  double c_prev = 0.0;
  double beta = 0.0;
  bool fallback = false;  // near-parallel pair degraded to plain projection
};

template <RowMatrix M>
UpdateCoeffs plain_coeffs(const LinearSystem<M>& sys,
                          std::span<const double> x, std::size_t ik) {
  const double r_ik = sys.matrix().row_dot(ik, x) - sys.rhs()[ik];
  return {-r_ik / sys.row_sq_norms()[ik], 0.0, 0.0, false};
}

template <RowMatrix M>
UpdateCoeffs inertial_coeffs(const LinearSystem<M>& sys,
                             std::span<const double> x, std::size_t ik,
                             std::size_t prev, double dot) {
  const double r_ik = sys.matrix().row_dot(ik, x) - sys.rhs()[ik];
  const double nik = sys.row_sq_norms()[ik];
  auto beta =
      inertial_beta_guarded(dot, nik, sys.row_sq_norms()[prev], r_ik);
  if (!beta) {
    UpdateCoeffs c = plain_coeffs(sys, x, ik);
    c.fallback = true;
    return c;
  }
  const double tau = (r_ik + *beta * dot) / nik;
  return {-tau, *beta, *beta, false};
}

// Projection along d = a_ik - (<a_ik, a_prev>/||a_prev||^2) a_prev, the
// direction orthogonal to the previous working row. <a_ik, d> = ||d||^2.
template <RowMatrix M>
UpdateCoeffs oblique_coeffs(const LinearSystem<M>& sys,
                            std::span<const double> x, std::size_t ik,
                            std::size_t prev, double dot) {
  const double r_ik = sys.matrix().row_dot(ik, x) - sys.rhs()[ik];
  const double nik = sys.row_sq_norms()[ik];
  const double nprev = sys.row_sq_norms()[prev];
  const double denom = nik - dot * dot / nprev;
  if (denom <= 0.0 || denom <= 1e-12 * std::sqrt(nik * denom)) {
    UpdateCoeffs c = plain_coeffs(sys, x, ik);
    c.fallback = true;
    return c;
  }
  const double eta = -r_ik / denom;
  return {eta, -eta * dot / nprev, -eta * dot / nprev, false};
}

template <RowMatrix M>
double apply_coeffs(const LinearSystem<M>& sys, std::span<double> x,
                    std::size_t ik, std::optional<std::size_t> prev,
                    const UpdateCoeffs& c, double dot) {
  if (c.c_prev != 0.0 && prev)
    sys.matrix().add_scaled_row(*prev, c.c_prev, x);
  if (c.c_ik != 0.0) sys.matrix().add_scaled_row(ik, c.c_ik, x);
  double step_sq = c.c_ik * c.c_ik * sys.row_sq_norms()[ik];
  if (prev)
    step_sq += c.c_prev * c.c_prev * sys.row_sq_norms()[*prev] +
               2.0 * c.c_ik * c.c_prev * dot;
  return std::sqrt(std::max(step_sq, 0.0));
}

inline void require_active_residual(const SolverState& state) {
  if (norm_sq(state.r) <= kResidualUnderflowGuard)
    throw ConvergedResidualError("residual underflow: nothing to step on");
}

// Row sampling with probability ||a_i||^2 / ||A||_F^2.
template <RowMatrix M>
std::size_t sample_row_norm_weighted(const LinearSystem<M>& sys, Rng& rng) {
  return rng.pick_weighted(sys.row_sq_norms(), sys.frob_sq());
}

// Refreshes state.r from scratch and zeroes the rows the last step placed
// the iterate on exactly.
template <RowMatrix M>
void recompute_residual(const LinearSystem<M>& sys, SolverState& state,
                        std::size_t ik, std::optional<std::size_t> landed_prev) {
  state.r = residual(sys, state.x);
  state.r[ik] = 0.0;
  if (landed_prev) state.r[*landed_prev] = 0.0;
}

}  // namespace detail

// One step of the randomized Kaczmarz method: sample by squared row norm,
// project orthogonally onto the chosen hyperplane.
template <RowMatrix M>
StepOutcome rk_step(SolverState& state, const LinearSystem<M>& sys, Rng& rng,
                    std::optional<std::size_t> forced = {}) {
  detail::require_active_residual(state);
  const std::size_t ik =
      forced ? *forced : detail::sample_row_norm_weighted(sys, rng);
  auto c = detail::plain_coeffs(sys, state.x, ik);
  const double step = detail::apply_coeffs(sys, state.x, ik, {}, c, 0.0);
  detail::recompute_residual(sys, state, ik, {});
  state.prev_index = ik;
  state.k += 1;
  return {{0.0, sys.rows(), ik, sys.frob_sq()}, 0.0, step};
}

// One greedy randomized Kaczmarz step: original threshold with 1/||A||_F^2,
// then a plain projection on the sampled row.
template <RowMatrix M>
StepOutcome grk_step(SolverState& state, const LinearSystem<M>& sys,
                     const GreedyContext& ctx, Rng& rng,
                     std::optional<std::size_t> forced = {}) {
  detail::require_active_residual(state);
  const double eps = grk_epsilon(state.r, sys.row_sq_norms(), ctx.frob_sq);
  auto iset = build_index_set(state.r, sys.row_sq_norms(), eps);
  const std::size_t ik =
      forced ? *forced
             : sample_index(iset, state.r, sys.row_sq_norms(), ctx.rule, rng);
  auto c = detail::plain_coeffs(sys, state.x, ik);
  const double step = detail::apply_coeffs(sys, state.x, ik, {}, c, 0.0);
  detail::recompute_residual(sys, state, ik, {});
  state.prev_index = ik;
  state.k += 1;
  return {{eps, iset.size(), ik, ctx.frob_sq}, 0.0, step};
}

// One step of Algorithm GMIRK: tightened threshold with the Gamma_k schedule,
// row sampled within I_k, then the inertial extrapolation w = x + beta a_prev
// followed by the projection onto H_ik. For k >= 1 the new iterate lies on
// both working hyperplanes.
template <RowMatrix M>
StepOutcome gmirk_step(SolverState& state, const LinearSystem<M>& sys,
                       const GreedyContext& ctx, Rng& rng,
                       std::optional<std::size_t> forced = {}) {
  detail::require_active_residual(state);
  const double gamma = gamma_for_iteration(ctx, state.k);
  const double eps = epsilon_k(state.r, sys.row_sq_norms(), gamma);
  auto iset = build_index_set(state.r, sys.row_sq_norms(), eps);
  const std::size_t ik =
      forced ? *forced
             : sample_index(iset, state.r, sys.row_sq_norms(), ctx.rule, rng);
  detail::UpdateCoeffs c;
  double dot = 0.0;
  const bool inertial = state.k >= 1 && state.prev_index.has_value();
  if (inertial) {
    dot = sys.matrix().rows_dot(ik, *state.prev_index);
    c = detail::inertial_coeffs(sys, state.x, ik, *state.prev_index, dot);
  } else {
    c = detail::plain_coeffs(sys, state.x, ik);
  }
  const double step =
      detail::apply_coeffs(sys, state.x, ik, state.prev_index, c, dot);
  detail::recompute_residual(
      sys, state, ik,
      inertial && !c.fallback ? state.prev_index
                              : std::optional<std::size_t>{});
  state.prev_index = ik;
  state.k += 1;
  return {{eps, iset.size(), ik, gamma}, c.beta, step};
}

// One multi-step inertial RK step: norm-weighted sampling without the greedy
// filter, then the same inertial update. Resamples once when the draw repeats
// the previous row (a repeat would be an exact no-op).
template <RowMatrix M>
StepOutcome mirk_step(SolverState& state, const LinearSystem<M>& sys, Rng& rng,
                      std::optional<std::size_t> forced = {}) {
  detail::require_active_residual(state);
  std::size_t ik = forced ? *forced : detail::sample_row_norm_weighted(sys, rng);
  if (!forced && state.prev_index && ik == *state.prev_index)
    ik = detail::sample_row_norm_weighted(sys, rng);
  detail::UpdateCoeffs c;
  double dot = 0.0;
  const bool inertial = state.k >= 1 && state.prev_index.has_value();
  if (inertial) {
    dot = sys.matrix().rows_dot(ik, *state.prev_index);
    c = detail::inertial_coeffs(sys, state.x, ik, *state.prev_index, dot);
  } else {
    c = detail::plain_coeffs(sys, state.x, ik);
  }
  const double step =
      detail::apply_coeffs(sys, state.x, ik, state.prev_index, c, dot);
  detail::recompute_residual(
      sys, state, ik,
      inertial && !c.fallback && ik != *state.prev_index
          ? state.prev_index
          : std::optional<std::size_t>{});
  state.prev_index = ik;
  state.k += 1;
  return {{0.0, sys.rows(), ik, sys.frob_sq()}, c.beta, step};
}

// One oblique-projection step: greedy selection as in gmirk_step, then a
// projection along the direction orthogonalized against the previous row.
// Geometrically the same point as the inertial update.
template <RowMatrix M>
StepOutcome oblique_step(SolverState& state, const LinearSystem<M>& sys,
                         const GreedyContext& ctx, Rng& rng,
                         std::optional<std::size_t> forced = {}) {
  detail::require_active_residual(state);
  const double gamma = gamma_for_iteration(ctx, state.k);
  const double eps = epsilon_k(state.r, sys.row_sq_norms(), gamma);
  auto iset = build_index_set(state.r, sys.row_sq_norms(), eps);
  const std::size_t ik =
      forced ? *forced
             : sample_index(iset, state.r, sys.row_sq_norms(), ctx.rule, rng);
  detail::UpdateCoeffs c;
  double dot = 0.0;
  const bool inertial = state.k >= 1 && state.prev_index.has_value();
  if (inertial) {
    dot = sys.matrix().rows_dot(ik, *state.prev_index);
    c = detail::oblique_coeffs(sys, state.x, ik, *state.prev_index, dot);
  } else {
    c = detail::plain_coeffs(sys, state.x, ik);
  }
  const double step =
      detail::apply_coeffs(sys, state.x, ik, state.prev_index, c, dot);
  detail::recompute_residual(
      sys, state, ik,
      inertial && !c.fallback ? state.prev_index
                              : std::optional<std::size_t>{});
  state.prev_index = ik;
  state.k += 1;
  return {{eps, iset.size(), ik, gamma}, c.beta, step};
}

struct TraceRow {
  std::size_t k;
  std::size_t chosen_index;
  double epsilon;
  std::size_t index_set_size;
  double beta;
  double rse;          // of the iterate this step produced; NaN without x_star
  double res_norm_sq;  // ||r^{(k)}||^2 at selection time
  double max_ratio;    // max_i |r_i|^2/||a_i||^2 at selection time
  double gamma_used;   // Gamma_k the max-ratio bound is checked against
};

enum class Termination { Converged, MaxIters };

struct IterationTrace {
  Variant variant = Variant::Gmirk;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;  // == rows.size() when rows are recorded
  std::vector<TraceRow> rows;
  std::vector<std::vector<double>> iterates;  // x^(0..K), only when retained
  std::vector<double> final_x;
  Termination termination = Termination::Converged;
  double final_rse = std::numeric_limits<double>::quiet_NaN();
  double norm_x_star_sq = std::numeric_limits<double>::quiet_NaN();
  double cpu_seconds = 0.0;  // iteration loop only
  std::size_t near_parallel_fallbacks = 0;
  double max_refresh_divergence = 0.0;  // incremental vs fresh residual
};

namespace detail {

// Residual maintenance strategies for the run loop. The greedy criterion
// needs the full residual every iteration, so it is carried incrementally
// where columns of A A^T are cheap (precomputed Gram, or CSC columns for
// sparse storage) and recomputed otherwise.
class GramResidualUpdater {
 public:
  explicit GramResidualUpdater(const DenseMatrix& gram) : gram_(gram) {}

  void apply(std::vector<double>& r, std::size_t ik, double c_ik,
             std::optional<std::size_t> prev, double c_prev) const {
    const double* col_ik = gram_.row(ik).data();
    if (prev && c_prev != 0.0) {
      const double* col_prev = gram_.row(*prev).data();
      for (std::size_t j = 0; j < r.size(); ++j)
        r[j] += c_ik * col_ik[j] + c_prev * col_prev[j];
    } else {
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += c_ik * col_ik[j];
    }
  }

 private:
  const DenseMatrix& gram_;
};

// Column-compressed mirror of a CSR matrix; r += c * (A a_i^T) touches only
// the columns in row i's support.
class CscResidualUpdater {
 public:
  explicit CscResidualUpdater(const CsrMatrix& a) : a_(a) {
    const std::size_t n = a.cols();
    col_ptr_.assign(n + 1, 0);
    for (std::size_t k = 0; k < a.nnz(); ++k) col_ptr_[a.col_ind()[k] + 1]++;
    for (std::size_t j = 0; j < n; ++j) col_ptr_[j + 1] += col_ptr_[j];
    row_ind_.resize(a.nnz());
    values_.resize(a.nnz());
    std::vector<std::size_t> next(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
        const std::size_t slot = next[a.col_ind()[k]]++;
        row_ind_[slot] = i;
        values_[slot] = a.values()[k];
      }
    }
  }

  void apply(std::vector<double>& r, std::size_t ik, double c_ik,
             std::optional<std::size_t> prev, double c_prev) const {
    accumulate(r, ik, c_ik);
    if (prev && c_prev != 0.0) accumulate(r, *prev, c_prev);
  }

 private:
  void accumulate(std::vector<double>& r, std::size_t row, double coeff) const {
    auto idx = a_.row_indices(row);
    auto val = a_.row_values(row);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double w = coeff * val[k];
      const std::size_t j = idx[k];
      for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p)
        r[row_ind_[p]] += w * values_[p];
    }
  }

  const CsrMatrix& a_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::size_t> row_ind_;
  std::vector<double> values_;
};

}  // namespace detail

// Full solve loop behind every CLI run. Iterates the chosen variant until the
// stopping rule fires or max_iters is reached, producing one trace row per
// iteration.
//
// Stopping: RSE = ||x - x_star||^2 / ||x_star||^2 <= rse_tol needs x_star
// (from a spectral summary or a planted solution); residual stopping uses
// ||r||^2 / ||b||^2 <= rse_tol instead.
//
// gram, when given, must be A A^T for this system; it makes the incremental
// residual update O(m) per step. Sparse systems build a CSC mirror instead,
// dense systems without a Gram cache recompute the residual each step.
template <RowMatrix M>
IterationTrace run(const LinearSystem<M>& sys, const RunConfig& cfg,
                   std::span<const double> x_star = {},
                   const DenseMatrix* gram = nullptr) {
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (cfg.rse_tol <= 0.0) throw ConfigError("rse_tol must be positive");
  const double nxs = x_star.empty() ? 0.0 : norm_sq(x_star);
  if (cfg.stopping == StoppingRule::Rse) {
    if (x_star.empty())
      throw ConfigError("RSE stopping requested without a reference solution");
    if (x_star.size() != sys.cols())
      throw DimensionMismatchError("x_star length does not match column count");
    if (nxs == 0.0)
      throw ConfigError("RSE is undefined for a zero reference solution");
  }
  const double bnsq = std::max(norm_sq(sys.rhs()), 1e-300);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const GreedyContext ctx = make_greedy_context(sys, cfg.rule);
  Rng rng(cfg.seed);
  SolverState state = make_state(sys, cfg.x0);

  IterationTrace trace;
  trace.variant = cfg.variant;
  trace.seed = cfg.seed;
  trace.norm_x_star_sq = x_star.empty() ? nan : nxs;
  if (cfg.retain_iterates) trace.iterates.push_back(state.x);

  // Residual maintenance strategy; see class comments above.
  std::optional<detail::GramResidualUpdater> gram_upd;
  std::optional<detail::CscResidualUpdater> csc_upd;
  if constexpr (std::is_same_v<M, CsrMatrix>) {
    csc_upd.emplace(sys.matrix());
  } else {
    if (gram) {
      if (gram->rows() != sys.rows() || gram->cols() != sys.rows())
        throw DimensionMismatchError("gram cache has wrong shape");
      gram_upd.emplace(*gram);
    }
  }
  const bool incremental = gram_upd.has_value() || csc_upd.has_value();

  std::vector<std::size_t> iset;
  std::vector<double> fresh;
  double rse = x_star.empty() ? nan : dist_sq(state.x, x_star) / nxs;

  const auto t0 = std::chrono::steady_clock::now();
  for (;;) {
    const ResidualStats stats = residual_stats(state.r, sys.row_sq_norms());
    if (cfg.stopping == StoppingRule::Rse && rse <= cfg.rse_tol) break;
    if (cfg.stopping == StoppingRule::Residual &&
        stats.norm_sq / bnsq <= cfg.rse_tol)
      break;
    if (stats.norm_sq <= kResidualUnderflowGuard) break;
    if (state.k >= cfg.max_iters) {
      trace.termination = Termination::MaxIters;
      break;
    }

    // Select the working row.
    const std::size_t k = state.k;
    std::optional<std::size_t> forced;
    if (k < cfg.forced_indices.size()) forced = cfg.forced_indices[k];
    double eps = 0.0;
    std::size_t iset_size = sys.rows();
    // rk and grk work against the frobenius constant at every k; the
    // inertial variants earn the tightened schedule through the
    // two vanished residual entries.
    const double gamma_used = is_inertial(cfg.variant)
                                  ? gamma_for_iteration(ctx, k)
                                  : ctx.frob_sq;
    std::size_t ik;
    if (is_greedy(cfg.variant)) {
      eps = greedy_threshold(stats, gamma_used);
      build_index_set_into(iset, state.r, sys.row_sq_norms(), eps, stats);
      iset_size = iset.size();
      ik = forced ? *forced
                  : sample_index(iset, state.r, sys.row_sq_norms(), ctx.rule,
                                 rng);
    } else {
      ik = forced ? *forced : detail::sample_row_norm_weighted(sys, rng);
      if (cfg.variant == Variant::Mirk && !forced && state.prev_index &&
          ik == *state.prev_index)
        ik = detail::sample_row_norm_weighted(sys, rng);
    }

    // Update the iterate.
    const bool inertial = is_inertial(cfg.variant) && k >= 1;
    detail::UpdateCoeffs c;
    double dot = 0.0;
    if (inertial) {
      const std::size_t prev = *state.prev_index;
      dot = gram_upd ? (*gram)(ik, prev) : sys.matrix().rows_dot(ik, prev);
      c = cfg.variant == Variant::Oblique
              ? detail::oblique_coeffs(sys, state.x, ik, prev, dot)
              : detail::inertial_coeffs(sys, state.x, ik, prev, dot);
      if (c.fallback) trace.near_parallel_fallbacks++;
    } else {
      c = detail::plain_coeffs(sys, state.x, ik);
    }
    detail::apply_coeffs(sys, state.x, ik, state.prev_index, c, dot);

    // Update the residual.
    if (incremental) {
      if (gram_upd)
        gram_upd->apply(state.r, ik, c.c_ik, state.prev_index, c.c_prev);
      else
        csc_upd->apply(state.r, ik, c.c_ik, state.prev_index, c.c_prev);
    } else {
      sys.matrix().matvec(state.x, state.r);
      for (std::size_t i = 0; i < state.r.size(); ++i)
        state.r[i] -= sys.rhs()[i];
    }
    // The projection zeroes row ik exactly; a completed inertial update also
    // zeroes the previous working row. A near-parallel fallback was a plain
    // projection, which leaves the previous row's residual alive.
    const bool landed_on_prev =
        inertial && !c.fallback && ik != *state.prev_index;
    state.r[ik] = 0.0;
    if (landed_on_prev) state.r[*state.prev_index] = 0.0;

    const std::optional<std::size_t> landed_prev = state.prev_index;
    state.prev_index = ik;
    state.k += 1;
    trace.iterations += 1;
    if (!x_star.empty()) rse = dist_sq(state.x, x_star) / nxs;
    if (cfg.record_trace)
      trace.rows.push_back({k, ik, eps, iset_size, c.beta, rse, stats.norm_sq,
                            stats.max_ratio, gamma_used});
    if (cfg.retain_iterates) trace.iterates.push_back(state.x);

    // Periodic refresh bounds incremental drift.
    if (incremental && cfg.residual_refresh_period > 0 &&
        state.k % cfg.residual_refresh_period == 0) {
      fresh.resize(sys.rows());
      sys.matrix().matvec(state.x, fresh);
      for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] -= sys.rhs()[i];
      fresh[ik] = 0.0;
      if (landed_on_prev) fresh[*landed_prev] = 0.0;
      double div_sq = 0.0;
      for (std::size_t i = 0; i < fresh.size(); ++i) {
        const double d = state.r[i] - fresh[i];
        div_sq += d * d;
      }
      trace.max_refresh_divergence =
          std::max(trace.max_refresh_divergence, std::sqrt(div_sq));
      state.r.swap(fresh);
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  trace.cpu_seconds = std::chrono::duration<double>(t1 - t0).count();
  trace.final_x = state.x;
  trace.final_rse = rse;
  return trace;
}

// A A^T as a dense matrix; the O(m) per-step residual update for dense
// systems feeds off its rows.
inline DenseMatrix gram_matrix(const DenseMatrix& a) {
  DenseMatrix g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i; j < a.rows(); ++j) {
      const double v = a.rows_dot(i, j);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

}  // namespace kaczmarz
