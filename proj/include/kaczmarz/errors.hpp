#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kaczmarz {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A row of the coefficient matrix has zero Euclidean norm.
class ZeroRowError : public Error {
 public:
  explicit ZeroRowError(std::size_t row)
      : Error("row " + std::to_string(row) + " has zero norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// Two rows are (numerically) linearly dependent, which the greedy theory
// assumes never happens.
class PairwiseDependentRowsError : public Error {
 public:
  PairwiseDependentRowsError(std::size_t i, std::size_t j)
      : Error("rows " + std::to_string(i) + " and " + std::to_string(j) +
              " are numerically parallel"),
        i_(i),
        j_(j) {}
  std::size_t first() const noexcept { return i_; }
  std::size_t second() const noexcept { return j_; }

 private:
  std::size_t i_, j_;
};

// An O(m^2) or dense-SVD computation was requested above its size cap and
// without an explicit override.
class SizeCapExceededError : public Error {
 public:
  using Error::Error;
};

// The reference solution failed its a-posteriori consistency check.
class InconsistentSystemError : public Error {
 public:
  using Error::Error;
};

// A step or threshold was requested on a residual that already underflowed;
// the caller should have stopped.
class ConvergedResidualError : public Error {
 public:
  using Error::Error;
};

// The greedy index set came out empty. Mathematically impossible for finite
// inputs, so this signals corrupted state (NaNs and the like).
class EmptyIndexSetError : public Error {
 public:
  using Error::Error;
};

// The 2x2 Gram system of the two working rows is numerically singular.
class NearParallelRowsError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("parse error at line " + std::to_string(line) + ": " + reason),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFieldError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kaczmarz
