#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linear_system.hpp"
#include "kaczmarz/rng.hpp"

namespace kaczmarz {

// How a working row is drawn from the greedy index set. ResidualWeighted is
// the classic rule p_i = |r_i|^2 / sum_{j in I} |r_j|^2; the generalized
// criterion admits any distribution supported on the set, of which Uniform
// and DeterministicArgmax are the useful extremes.
enum class ProbabilityRule { ResidualWeighted, Uniform, DeterministicArgmax };

inline ProbabilityRule rule_from_name(std::string_view name) {
  if (name == "residual") return ProbabilityRule::ResidualWeighted;
  if (name == "uniform") return ProbabilityRule::Uniform;
  if (name == "argmax") return ProbabilityRule::DeterministicArgmax;
  throw ConfigError("unknown probability rule: " + std::string(name));
}

inline std::string_view rule_name(ProbabilityRule rule) {
  switch (rule) {
    case ProbabilityRule::ResidualWeighted: return "residual";
    case ProbabilityRule::Uniform: return "uniform";
    case ProbabilityRule::DeterministicArgmax: return "argmax";
  }
  return "?";
}

// Threshold schedule constants: Gamma_0 = ||A||_F^2, Gamma_1 = gamma1,
// Gamma_k = gamma2 for k >= 2.
struct GreedyContext {
  double frob_sq;
  double gamma1;
  double gamma2;
  ProbabilityRule rule = ProbabilityRule::ResidualWeighted;
};

inline double gamma_for_iteration(const GreedyContext& ctx, std::size_t k) {
  if (k == 0) return ctx.frob_sq;
  if (k == 1) return ctx.gamma1;
  return ctx.gamma2;
}

// Residual norms below this are treated as converged; thresholds would
// otherwise divide by (near) zero.
inline constexpr double kResidualUnderflowGuard = 1e-300;

struct ResidualStats {
  double norm_sq = 0.0;
  double max_ratio = 0.0;       // max_i |r_i|^2 / ||a_i||^2
  std::size_t argmax = 0;       // smallest index attaining max_ratio
};

inline ResidualStats residual_stats(std::span<const double> r,
                                    std::span<const double> row_sq_norms) {
  ResidualStats s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double ratio = r[i] * r[i] / row_sq_norms[i];
    s.norm_sq += r[i] * r[i];
    if (ratio > s.max_ratio) {
      s.max_ratio = ratio;
      s.argmax = i;
    }
  }
  return s;
}

inline double greedy_threshold(const ResidualStats& stats, double gamma) {
  if (stats.norm_sq <= kResidualUnderflowGuard)
    throw ConvergedResidualError("residual underflow: stop instead of selecting");
  return 0.5 * (stats.max_ratio / stats.norm_sq + 1.0 / gamma);
}

// epsilon_k of the tightened criterion, with Gamma_k passed in by the caller.
inline double epsilon_k(std::span<const double> r,
                        std::span<const double> row_sq_norms, double gamma) {
  return greedy_threshold(residual_stats(r, row_sq_norms), gamma);
}

// The original greedy threshold, which keeps 1/||A||_F^2 as the second
// summand at every iteration.
inline double grk_epsilon(std::span<const double> r,
                          std::span<const double> row_sq_norms,
                          double frob_sq) {
  return epsilon_k(r, row_sq_norms, frob_sq);
}

// I_k = { i : |r_i|^2 >= eps ||r||^2 ||a_i||^2 }, membership inclusive.
// The argmax of |r_i|^2/||a_i||^2 always belongs to the set in exact
// arithmetic; it is force-included so a borderline rounding cannot leave the
// selection without its best row.
inline void build_index_set_into(std::vector<std::size_t>& set,
                                 std::span<const double> r,
                                 std::span<const double> row_sq_norms,
                                 double eps, const ResidualStats& stats) {
  set.clear();
  const double scaled = eps * stats.norm_sq;
  bool has_argmax = false;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] * r[i] >= scaled * row_sq_norms[i]) {
      set.push_back(i);
      has_argmax |= (i == stats.argmax);
    }
  }
  if (!has_argmax && stats.max_ratio > 0.0) {
    set.insert(std::lower_bound(set.begin(), set.end(), stats.argmax),
               stats.argmax);
  }
  if (set.empty())
    throw EmptyIndexSetError("greedy index set is empty (corrupted residual?)");
}

inline std::vector<std::size_t> build_index_set(
    std::span<const double> r, std::span<const double> row_sq_norms,
    double eps) {
  std::vector<std::size_t> set;
  build_index_set_into(set, r, row_sq_norms, eps,
                       residual_stats(r, row_sq_norms));
  return set;
}

// Draws one index from the set under the given rule. DeterministicArgmax
// breaks ties at the smallest index.
inline std::size_t sample_index(std::span<const std::size_t> index_set,
                                std::span<const double> r,
                                std::span<const double> row_sq_norms,
                                ProbabilityRule rule, Rng& rng) {
  if (index_set.empty())
    throw EmptyIndexSetError("cannot sample from an empty index set");
  if (index_set.size() == 1) return index_set[0];
  switch (rule) {
    case ProbabilityRule::Uniform:
      return index_set[rng.pick_uniform(index_set.size())];
    case ProbabilityRule::DeterministicArgmax: {
      std::size_t best = index_set[0];
      double best_ratio = -1.0;
      for (std::size_t i : index_set) {
        const double ratio = r[i] * r[i] / row_sq_norms[i];
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best = i;
        }
      }
      return best;
    }
    case ProbabilityRule::ResidualWeighted: {
      double total = 0.0;
      for (std::size_t i : index_set) total += r[i] * r[i];
      double u = rng.uniform01() * total;
      double acc = 0.0;
      for (std::size_t k = 0; k + 1 < index_set.size(); ++k) {
        acc += r[index_set[k]] * r[index_set[k]];
        if (u < acc) return index_set[k];
      }
      return index_set.back();
    }
  }
  throw ConfigError("unhandled probability rule");
}

struct SelectionRecord {
  double epsilon = 0.0;
  std::size_t index_set_size = 0;
  std::size_t chosen_index = 0;
  double gamma_used = 0.0;
};

template <RowMatrix M>
GreedyContext make_greedy_context(const LinearSystem<M>& sys,
                                  ProbabilityRule rule) {
  double min1 = std::numeric_limits<double>::infinity();
  double min2 = std::numeric_limits<double>::infinity();
  for (double nsq : sys.row_sq_norms()) {
    if (nsq < min1) {
      min2 = min1;
      min1 = nsq;
    } else if (nsq < min2) {
      min2 = nsq;
    }
  }
  return {sys.frob_sq(), sys.frob_sq() - min1, sys.frob_sq() - min1 - min2,
          rule};
}

}  // namespace kaczmarz
