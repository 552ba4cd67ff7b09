#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linear_system.hpp"

namespace kaczmarz {

struct CoherenceSummary {
  double gamma1;
  double gamma2;
  double delta;
};

// gamma1 = max over excluded i of sum_{j != i} ||a_j||^2, and gamma2 the same
// with an excluded pair. Evaluated through the closed forms
//   gamma1 = ||A||_F^2 - min_i ||a_i||^2
//   gamma2 = ||A||_F^2 - (two smallest ||a_i||^2)
// which are algebraically identical and O(m) instead of O(m^2).
template <RowMatrix M>
std::pair<double, double> gammas(const LinearSystem<M>& sys) {
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
  const double gamma1 = sys.frob_sq() - min1;
  const double gamma2 = sys.frob_sq() - min1 - min2;
  return {gamma1, gamma2};
}

inline constexpr std::size_t kDeltaRowsCap = 2000;
inline constexpr double kParallelCosTol = 1e-12;

// Minimum absolute cosine between distinct rows. O(m^2) row dots, so it is
// capped by default; it feeds certification only, never the solvers.
template <RowMatrix M>
double delta(const LinearSystem<M>& sys, std::size_t rows_cap = kDeltaRowsCap,
             bool override_cap = false) {
  const std::size_t m = sys.rows();
  if (m > rows_cap && !override_cap)
    throw SizeCapExceededError("delta is O(m^2): " + std::to_string(m) +
                               " rows exceeds cap " + std::to_string(rows_cap));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double c =
          std::abs(sys.matrix().rows_dot(i, j)) /
          std::sqrt(sys.row_sq_norms()[i] * sys.row_sq_norms()[j]);
      if (c >= 1.0 - kParallelCosTol) throw PairwiseDependentRowsError(i, j);
      if (c < best) best = c;
    }
  }
  return best;
}

// Same quantity read off a precomputed Gram matrix G = A A^T.
inline double delta_from_gram(const DenseMatrix& gram) {
  const std::size_t m = gram.rows();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double c = std::abs(gram(i, j)) / std::sqrt(gram(i, i) * gram(j, j));
      if (c >= 1.0 - kParallelCosTol) throw PairwiseDependentRowsError(i, j);
      if (c < best) best = c;
    }
  }
  return best;
}

template <RowMatrix M>
CoherenceSummary coherence_summary(const LinearSystem<M>& sys,
                                   std::size_t rows_cap = kDeltaRowsCap,
                                   bool override_cap = false) {
  auto [g1, g2] = gammas(sys);
  return {g1, g2, delta(sys, rows_cap, override_cap)};
}

}  // namespace kaczmarz
