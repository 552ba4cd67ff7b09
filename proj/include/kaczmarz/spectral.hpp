#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/linear_system.hpp"

namespace kaczmarz {

inline constexpr std::size_t kSvdDimCap = 5000;

// Spectral data of the system plus the reference solution
//   x_star = pinv(A) b + (I - pinv(A) A) x0,
// the projection of x0 onto the solution set. range_basis keeps the leading
// right singular vectors (an orthonormal basis of Range(A^T)) so later checks
// can project onto the orthogonal complement.
struct SpectralSummary {
  double sigma_min_sq = 0.0;  // smallest nonzero singular value, squared
  double sigma_max = 0.0;
  std::size_t rank = 0;
  std::vector<double> x_star;

  std::size_t n = 0;
  std::vector<double> range_basis;  // n x rank, column-major

  // || (I - Vr Vr^T) v ||_2: distance of v from Range(A^T).
  double range_distance(std::span<const double> v) const {
    Eigen::Map<const Eigen::MatrixXd> vr(range_basis.data(),
                                         static_cast<Eigen::Index>(n),
                                         static_cast<Eigen::Index>(rank));
    Eigen::Map<const Eigen::VectorXd> vv(v.data(),
                                         static_cast<Eigen::Index>(v.size()));
    Eigen::VectorXd out = vv - vr * (vr.transpose() * vv);
    return out.norm();
  }
};

namespace detail {

template <RowMatrix M>
Eigen::MatrixXd to_eigen(const M& a) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  std::vector<double> row(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    a.add_scaled_row(i, 1.0, row);
    for (std::size_t j = 0; j < a.cols(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return out;
}

inline Eigen::MatrixXd to_eigen(const DenseMatrix& a) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(
      a.data().data(), static_cast<Eigen::Index>(a.rows()),
      static_cast<Eigen::Index>(a.cols()));
}

}  // namespace detail

// Full dense SVD of A; rank cut at sigma_max * max(m, n) * machine epsilon.
// Intended for desk scale, hence the min-dimension cap.
template <RowMatrix M>
SpectralSummary spectral_summary(const LinearSystem<M>& sys,
                                 std::span<const double> x0 = {},
                                 std::size_t dim_cap = kSvdDimCap,
                                 bool override_cap = false) {
  const std::size_t m = sys.rows(), n = sys.cols();
  if (std::min(m, n) > dim_cap && !override_cap)
    throw SizeCapExceededError("dense SVD above size cap " +
                               std::to_string(dim_cap));
  if (!x0.empty() && x0.size() != n)
    throw DimensionMismatchError("x0 length does not match column count");

  Eigen::MatrixXd a = detail::to_eigen(sys.matrix());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double sigma_max = sv.size() ? sv(0) : 0.0;
  const double cut = sigma_max * static_cast<double>(std::max(m, n)) *
                     std::numeric_limits<double>::epsilon();
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(sv.size()) &&
         sv(static_cast<Eigen::Index>(rank)) > cut)
    ++rank;
  if (rank == 0) throw InconsistentSystemError("matrix is numerically zero");

  const auto r = static_cast<Eigen::Index>(rank);
  Eigen::Map<const Eigen::VectorXd> b(sys.rhs().data(),
                                      static_cast<Eigen::Index>(m));
  Eigen::VectorXd coeffs =
      sv.head(r).cwiseInverse().asDiagonal() * (svd.matrixU().leftCols(r).transpose() * b);
  Eigen::VectorXd xs = svd.matrixV().leftCols(r) * coeffs;
  if (!x0.empty()) {
    Eigen::Map<const Eigen::VectorXd> x0v(x0.data(),
                                          static_cast<Eigen::Index>(n));
    xs += x0v - svd.matrixV().leftCols(r) *
                    (svd.matrixV().leftCols(r).transpose() * x0v);
  }

  // A-posteriori consistency check; the solvers assume Ax = b is solvable.
  const double resid = (a * xs - b).norm();
  const double btol = 1e-10 * std::max(1.0, b.norm());
  if (resid > btol)
    throw InconsistentSystemError("||A x_star - b|| = " + std::to_string(resid) +
                                  " exceeds consistency tolerance");

  SpectralSummary out;
  out.sigma_min_sq = sv(r - 1) * sv(r - 1);
  out.sigma_max = sigma_max;
  out.rank = rank;
  out.x_star.assign(xs.data(), xs.data() + n);
  out.n = n;
  out.range_basis.resize(n * rank);
  Eigen::Map<Eigen::MatrixXd>(out.range_basis.data(),
                              static_cast<Eigen::Index>(n), r) =
      svd.matrixV().leftCols(r);
  return out;
}

}  // namespace kaczmarz
