#include <doctest.h>

#include <sstream>

#include "kaczmarz/matrix_market.hpp"

using namespace kaczmarz;

namespace {

MmDocument parse(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

}  // namespace

TEST_CASE("coordinate real general") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate real general\n"
      "% a comment\n"
      "3 2 4\n"
      "1 1 1.0\n"
      "2 2 1.0\n"
      "3 1 1.0\n"
      "3 2 1.0\n");
  CHECK(doc.rows == 3);
  CHECK(doc.cols == 2);
  auto a = to_csr(doc);
  CHECK(a.nnz() == 4);
  CHECK(a.to_dense() ==
        DenseMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}}));
}

TEST_CASE("parse-write-parse is the identity on the internal form") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate real general\n"
      "3 3 4\n"
      "1 3 2.5\n"
      "2 1 -1.0\n"
      "3 3 0.125\n"
      "1 1 7e-3\n");
  auto a = to_csr(doc);
  std::ostringstream out;
  write_matrix_market(out, a);
  std::istringstream back(out.str());
  auto b = to_csr(parse_matrix_market(back));
  CHECK(a == b);
}

TEST_CASE("symmetric coordinate expands the off-diagonal entries") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate real symmetric\n"
      "2 2 2\n"
      "1 1 3.0\n"
      "2 1 -2.0\n");
  auto a = to_dense(doc);
  CHECK(a(0, 1) == -2.0);
  CHECK(a(1, 0) == -2.0);
  CHECK(a(0, 0) == 3.0);
  CHECK(a(1, 1) == 0.0);
}

TEST_CASE("pattern entries take value one") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate pattern general\n"
      "2 3 3\n"
      "1 1\n"
      "2 3\n"
      "1 3\n");
  auto a = to_dense(doc);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 2) == 1.0);
  CHECK(a(1, 2) == 1.0);
}

TEST_CASE("integer field parses as doubles") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate integer general\n"
      "2 2 2\n"
      "1 1 4\n"
      "2 2 -7\n");
  auto a = to_dense(doc);
  CHECK(a(0, 0) == 4.0);
  CHECK(a(1, 1) == -7.0);
}

TEST_CASE("duplicate entries are summed") {
  auto doc = parse(
      "%%MatrixMarket matrix coordinate real general\n"
      "2 2 3\n"
      "1 1 1.0\n"
      "1 1 2.0\n"
      "2 2 5.0\n");
  auto a = to_csr(doc);
  CHECK(a.nnz() == 2);
  CHECK(a.to_dense()(0, 0) == 3.0);
}

TEST_CASE("array general is column-major") {
  auto doc = parse(
      "%%MatrixMarket matrix array real general\n"
      "2 2\n"
      "1\n3\n2\n4\n");
  auto a = to_dense(doc);
  CHECK(a == DenseMatrix::from_rows({{1, 2}, {3, 4}}));
}

TEST_CASE("array symmetric carries the lower triangle") {
  auto doc = parse(
      "%%MatrixMarket matrix array real symmetric\n"
      "2 2\n"
      "1\n5\n2\n");
  auto a = to_dense(doc);
  CHECK(a == DenseMatrix::from_rows({{1, 5}, {5, 2}}));
}

TEST_CASE("dense array writer round-trips") {
  DenseMatrix a = DenseMatrix::from_rows({{1.5, -2}, {0, 0.0625}, {3, 4}});
  std::ostringstream out;
  write_matrix_market(out, a);
  std::istringstream back(out.str());
  CHECK(to_dense(parse_matrix_market(back)) == a);
}

TEST_CASE("header and data errors carry line numbers") {
  CHECK_THROWS_AS(parse("%%NotMatrixMarket\n"), ParseError);
  CHECK_THROWS_AS(parse("%%MatrixMarket vector coordinate real general\n"),
                  ParseError);
  CHECK_THROWS_AS(
      parse("%%MatrixMarket matrix coordinate complex general\n2 2 1\n"),
      UnsupportedFieldError);
  CHECK_THROWS_AS(
      parse("%%MatrixMarket matrix coordinate real hermitian\n2 2 1\n"),
      UnsupportedFieldError);
  CHECK_THROWS_AS(
      parse("%%MatrixMarket matrix array pattern general\n2 2\n"), ParseError);
  try {
    parse(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 2\n"
        "1 1 1.0\n");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 1\n"
                        "5 1 1.0\n"),
                  ParseError);
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 1\n"
                        "1 1 abc\n"),
                  ParseError);
}

TEST_CASE("header tokens are case-insensitive") {
  auto doc = parse(
      "%%matrixmarket MATRIX Coordinate Real GENERAL\n"
      "2 2 1\n"
      "1 2 9.0\n");
  CHECK(to_dense(doc)(0, 1) == 9.0);
}
