#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/storage.hpp"

namespace kaczmarz {

// A consistent linear system Ax = b with the row quantities every solver and
// certificate needs cached up front. Immutable after construction and safe to
// share across threads.
template <RowMatrix M>
class LinearSystem {
 public:
  LinearSystem(M matrix, std::vector<double> rhs)
      : matrix_(std::move(matrix)), rhs_(std::move(rhs)) {
    const std::size_t m = matrix_.rows();
    if (m < 2)
      throw DimensionMismatchError("need at least two rows");
    if (rhs_.size() != m)
      throw DimensionMismatchError("rhs length does not match row count");
    row_sq_norms_.resize(m);
    frob_sq_ = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double nsq = matrix_.row_sq_norm(i);
      if (nsq == 0.0) throw ZeroRowError(i);
      row_sq_norms_[i] = nsq;
      frob_sq_ += nsq;
    }
  }

  const M& matrix() const noexcept { return matrix_; }
  std::span<const double> rhs() const noexcept { return rhs_; }
  std::size_t rows() const noexcept { return matrix_.rows(); }
  std::size_t cols() const noexcept { return matrix_.cols(); }
  std::span<const double> row_sq_norms() const noexcept {
    return row_sq_norms_;
  }
  double frob_sq() const noexcept { return frob_sq_; }

 private:
  M matrix_;
  std::vector<double> rhs_;
  std::vector<double> row_sq_norms_;
  double frob_sq_ = 0.0;
};

template <RowMatrix M>
LinearSystem<M> build_system(M matrix, std::vector<double> rhs) {
  return LinearSystem<M>(std::move(matrix), std::move(rhs));
}

// r = Ax - b, recomputed by a full pass. Solvers carry their own residual
// incrementally; this is the reference evaluation.
template <RowMatrix M>
std::vector<double> residual(const LinearSystem<M>& sys,
                             std::span<const double> x) {
  if (x.size() != sys.cols())
    throw DimensionMismatchError("x length does not match column count");
  std::vector<double> r(sys.rows());
  sys.matrix().matvec(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= sys.rhs()[i];
  return r;
}

inline double norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(norm_sq(v)); }

inline double dist_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace kaczmarz
