#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kaczmarz/problem.hpp"
#include "kaczmarz/solvers.hpp"
#include "kaczmarz/spectral.hpp"
#include "kaczmarz/trace_io.hpp"

namespace kaczmarz {

enum class BenchAxis { Rows, Cols, Fixed };

inline BenchAxis axis_from_name(std::string_view name) {
  if (name == "rows") return BenchAxis::Rows;
  if (name == "cols") return BenchAxis::Cols;
  if (name == "fixed") return BenchAxis::Fixed;
  throw ConfigError("unknown bench axis: " + std::string(name));
}

// One sweep after the experimental protocol: per cell, `trials` independent
// seeded runs (seed = base_seed + trial), iteration counts and loop wall-time
// averaged over the trials that converged.
struct BenchPlan {
  BenchAxis axis = BenchAxis::Rows;
  std::vector<std::size_t> sizes;          // swept dimension (rows/cols axes)
  std::size_t fixed_rows = 100;            // the non-swept dimension
  std::size_t fixed_cols = 100;
  std::vector<double> t_values = {0.1, 0.5, 0.9};
  std::vector<Variant> variants = {Variant::Grk, Variant::Gmirk};
  std::size_t trials = 20;
  std::uint64_t base_seed = 0;
  double rse_tol = 1e-12;
  std::size_t max_iters = 2000000;
  ProbabilityRule rule = ProbabilityRule::ResidualWeighted;
  std::vector<std::string> matrix_paths;   // Fixed axis inputs
  std::size_t gram_rows_cap = 2048;        // Gram cache memory guard
  std::size_t threads = 0;                 // 0: KACZ_THREADS env, then hardware
};

struct BenchCell {
  std::string variant;
  std::string axis_value;
  double t = std::numeric_limits<double>::quiet_NaN();
  double mean_iters = std::numeric_limits<double>::quiet_NaN();
  double mean_cpu = std::numeric_limits<double>::quiet_NaN();
  std::size_t trials = 0;
  std::size_t failures = 0;
};

namespace detail {

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested) return requested;
  if (const char* env = std::getenv("KACZ_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

inline DenseMatrix eigen_gram(const DenseMatrix& a) {
  const auto m = static_cast<Eigen::Index>(a.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      am(a.data().data(), m, static_cast<Eigen::Index>(a.cols()));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  g.selfadjointView<Eigen::Lower>().rankUpdate(am);
  DenseMatrix out(a.rows(), a.rows());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = g(i, j);
      out(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = g(i, j);
    }
  return out;
}

struct BenchCellSpec {
  std::string axis_value;
  double t = std::numeric_limits<double>::quiet_NaN();
  bool synthetic = true;
  std::size_t m = 0, n = 0;
  std::string path;
};

inline std::vector<BenchCellSpec> expand_cells(const BenchPlan& plan) {
  std::vector<BenchCellSpec> cells;
  if (plan.axis == BenchAxis::Fixed) {
    if (plan.matrix_paths.empty())
      throw ConfigError("fixed-axis bench needs at least one matrix path");
    for (const auto& p : plan.matrix_paths) {
      BenchCellSpec c;
      c.axis_value = std::filesystem::path(p).stem().string();
      c.synthetic = false;
      c.path = p;
      cells.push_back(std::move(c));
    }
    return cells;
  }
  if (plan.sizes.empty()) throw ConfigError("bench sweep needs sizes");
  if (plan.t_values.empty()) throw ConfigError("bench sweep needs t values");
  for (std::size_t size : plan.sizes) {
    for (double t : plan.t_values) {
      BenchCellSpec c;
      c.axis_value = std::to_string(size);
      c.t = t;
      c.m = plan.axis == BenchAxis::Rows ? size : plan.fixed_rows;
      c.n = plan.axis == BenchAxis::Rows ? plan.fixed_cols : size;
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

struct TrialOutcome {
  bool converged = false;
  std::size_t iters = 0;
  double cpu = 0.0;
};

}  // namespace detail

inline std::vector<BenchCell> run_bench(const BenchPlan& plan) {
  if (plan.trials < 1) throw ConfigError("bench needs at least one trial");
  if (plan.variants.empty()) throw ConfigError("bench needs a variant list");
  const auto cells = detail::expand_cells(plan);
  const std::size_t n_tasks = cells.size() * plan.trials;

  // One task per (cell, trial): the system, its spectral summary and its
  // Gram cache are shared by every variant of the comparison.
  struct TaskResult {
    bool setup_ok = false;
    std::vector<detail::TrialOutcome> per_variant;
  };
  std::vector<TaskResult> results(n_tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      const std::size_t cell_idx = task / plan.trials;
      const std::size_t trial = task % plan.trials;
      const auto& cell = cells[cell_idx];
      TaskResult& out = results[task];
      out.per_variant.assign(plan.variants.size(), {});
      try {
        const std::uint64_t seed = plan.base_seed + trial;
        ProblemBundle problem =
            cell.synthetic
                ? generate_synthetic({cell.m, cell.n, cell.t, seed})
                : load_matrix_market_problem(cell.path, seed);
        std::visit(
            [&](const auto& sys) {
              SpectralSummary spectral = spectral_summary(sys);
              std::optional<DenseMatrix> gram;
              if constexpr (std::is_same_v<std::decay_t<decltype(sys.matrix())>,
                                           DenseMatrix>) {
                if (sys.rows() <= plan.gram_rows_cap)
                  gram = detail::eigen_gram(sys.matrix());
              }
              out.setup_ok = true;
              for (std::size_t v = 0; v < plan.variants.size(); ++v) {
                RunConfig cfg;
                cfg.variant = plan.variants[v];
                cfg.max_iters = plan.max_iters;
                cfg.rse_tol = plan.rse_tol;
                cfg.seed = seed;
                cfg.rule = plan.rule;
                cfg.record_trace = false;
                IterationTrace trace =
                    run(sys, cfg, spectral.x_star,
                        gram ? &*gram : nullptr);
                out.per_variant[v] = {
                    trace.termination == Termination::Converged,
                    trace.iterations, trace.cpu_seconds};
              }
            },
            problem.sys);
      } catch (const std::exception&) {
        out.setup_ok = false;  // counted as failures below, sweep continues
      }
    }
  };

  const std::size_t n_threads =
      std::min(detail::resolve_threads(plan.threads), std::max<std::size_t>(n_tasks, 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Single collector: fold trial outcomes into cell means.
  std::vector<BenchCell> table;
  for (std::size_t v = 0; v < plan.variants.size(); ++v) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      BenchCell cell;
      cell.variant = variant_name(plan.variants[v]);
      cell.axis_value = cells[c].axis_value;
      cell.t = cells[c].t;
      cell.trials = plan.trials;
      double sum_iters = 0.0, sum_cpu = 0.0;
      std::size_t ok = 0;
      for (std::size_t trial = 0; trial < plan.trials; ++trial) {
        const TaskResult& r = results[c * plan.trials + trial];
        if (!r.setup_ok || !r.per_variant[v].converged) {
          cell.failures++;
          continue;
        }
        sum_iters += static_cast<double>(r.per_variant[v].iters);
        sum_cpu += r.per_variant[v].cpu;
        ++ok;
      }
      if (ok > 0) {
        cell.mean_iters = sum_iters / static_cast<double>(ok);
        cell.mean_cpu = sum_cpu / static_cast<double>(ok);
      }
      table.push_back(std::move(cell));
    }
  }
  return table;
}

// Long-format CSV; empty fields stand for unavailable means (all trials
// failed) and for the t column of fixed-matrix cells.
inline void write_bench_csv(std::span<const BenchCell> table,
                            std::ostream& out) {
  out << "variant,axis_value,t,mean_iters,mean_cpu,trials,failures\n";
  auto put = [&](double v) {
    if (!std::isnan(v)) out << detail::fmt17(v);
  };
  for (const BenchCell& cell : table) {
    out << cell.variant << ',' << cell.axis_value << ',';
    put(cell.t);
    out << ',';
    put(cell.mean_iters);
    out << ',';
    put(cell.mean_cpu);
    out << ',' << cell.trials << ',' << cell.failures << '\n';
  }
}

}  // namespace kaczmarz
