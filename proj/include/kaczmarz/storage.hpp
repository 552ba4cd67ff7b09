#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "kaczmarz/errors.hpp"

namespace kaczmarz {

// Row-major dense storage. Row access is the dominant pattern in every
// algorithm here, so rows are contiguous.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DimensionMismatchError("dense data size does not match shape");
  }

  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix a(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != a.cols_)
        throw DimensionMismatchError("ragged row in dense initializer");
      std::copy(row.begin(), row.end(), a.data_.begin() + i * a.cols_);
      ++i;
    }
    return a;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
    return a;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  double row_dot(std::size_t i, std::span<const double> x) const {
    const double* a = data_.data() + i * cols_;
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += a[j] * x[j];
    return s;
  }

  double rows_dot(std::size_t i, std::size_t j) const {
    const double* a = data_.data() + i * cols_;
    const double* b = data_.data() + j * cols_;
    double s = 0.0;
    for (std::size_t k = 0; k < cols_; ++k) s += a[k] * b[k];
    return s;
  }

  double row_sq_norm(std::size_t i) const { return rows_dot(i, i); }

  // x += alpha * a_i
  void add_scaled_row(std::size_t i, double alpha, std::span<double> x) const {
    const double* a = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) x[j] += alpha * a[j];
  }

  // out = A x
  void matvec(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) out[i] = row_dot(i, x);
  }

  // out = A a_i^T, i.e. the i-th column of A A^T.
  void gram_column(std::size_t i, std::span<double> out) const {
    for (std::size_t j = 0; j < rows_; ++j) out[j] = rows_dot(j, i);
  }

  double density() const noexcept {
    if (data_.empty()) return 0.0;
    std::size_t nz = 0;
    for (double v : data_) nz += (v != 0.0);
    return static_cast<double>(nz) / static_cast<double>(data_.size());
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Compressed sparse row storage with sorted, duplicate-free column indices
// within each row.
class CsrMatrix {
 public:
  struct Triplet {
    std::size_t row, col;
    double value;
  };

  CsrMatrix() = default;

  CsrMatrix(std::size_t rows, std::size_t cols,
            std::vector<std::size_t> row_ptr, std::vector<std::size_t> col_ind,
            std::vector<double> values)
      : rows_(rows),
        cols_(cols),
        row_ptr_(std::move(row_ptr)),
        col_ind_(std::move(col_ind)),
        values_(std::move(values)) {
    if (row_ptr_.size() != rows_ + 1 || col_ind_.size() != values_.size() ||
        row_ptr_.back() != values_.size())
      throw DimensionMismatchError("inconsistent CSR arrays");
  }

  // Builds CSR from unordered triplets; duplicate (i, j) entries are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<Triplet> entries) {
    for (const auto& e : entries)
      if (e.row >= rows || e.col >= cols)
        throw DimensionMismatchError("triplet outside matrix shape");
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) {
                return a.row != b.row ? a.row < b.row : a.col < b.col;
              });
    CsrMatrix a;
    a.rows_ = rows;
    a.cols_ = cols;
    a.row_ptr_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < entries.size();) {
      std::size_t k2 = k;
      double sum = 0.0;
      while (k2 < entries.size() && entries[k2].row == entries[k].row &&
             entries[k2].col == entries[k].col)
        sum += entries[k2++].value;
      a.col_ind_.push_back(entries[k].col);
      a.values_.push_back(sum);
      a.row_ptr_[entries[k].row + 1]++;
      k = k2;
    }
    for (std::size_t i = 0; i < rows; ++i) a.row_ptr_[i + 1] += a.row_ptr_[i];
    return a;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_indices(std::size_t i) const {
    return {col_ind_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  double row_dot(std::size_t i, std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      s += values_[k] * x[col_ind_[k]];
    return s;
  }

  // Sparse-sparse dot of two rows; both index lists are sorted.
  double rows_dot(std::size_t i, std::size_t j) const {
    std::size_t p = row_ptr_[i], pe = row_ptr_[i + 1];
    std::size_t q = row_ptr_[j], qe = row_ptr_[j + 1];
    double s = 0.0;
    while (p < pe && q < qe) {
      if (col_ind_[p] < col_ind_[q])
        ++p;
      else if (col_ind_[q] < col_ind_[p])
        ++q;
      else
        s += values_[p++] * values_[q++];
    }
    return s;
  }

  double row_sq_norm(std::size_t i) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      s += values_[k] * values_[k];
    return s;
  }

  void add_scaled_row(std::size_t i, double alpha, std::span<double> x) const {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      x[col_ind_[k]] += alpha * values_[k];
  }

  void matvec(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) out[i] = row_dot(i, x);
  }

  void gram_column(std::size_t i, std::span<double> out) const {
    for (std::size_t j = 0; j < rows_; ++j) out[j] = rows_dot(j, i);
  }

  DenseMatrix to_dense() const {
    DenseMatrix a(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        a(i, col_ind_[k]) = values_[k];
    return a;
  }

  double density() const noexcept {
    return rows_ == 0 || cols_ == 0
               ? 0.0
               : static_cast<double>(nnz()) /
                     (static_cast<double>(rows_) * static_cast<double>(cols_));
  }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::size_t>& col_ind() const noexcept { return col_ind_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> row_ptr_;  // size rows + 1
  std::vector<std::size_t> col_ind_;
  std::vector<double> values_;
};

template <class M>
concept RowMatrix = requires(const M& a, std::size_t i,
                             std::span<const double> x, std::span<double> y) {
  { a.rows() } -> std::convertible_to<std::size_t>;
  { a.cols() } -> std::convertible_to<std::size_t>;
  { a.row_dot(i, x) } -> std::convertible_to<double>;
  { a.rows_dot(i, i) } -> std::convertible_to<double>;
  { a.row_sq_norm(i) } -> std::convertible_to<double>;
  a.add_scaled_row(i, 0.0, y);
  a.matvec(x, y);
  a.gram_column(i, y);
};

static_assert(RowMatrix<DenseMatrix>);
static_assert(RowMatrix<CsrMatrix>);

}  // namespace kaczmarz
