#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kaczmarz/errors.hpp"
#include "kaczmarz/storage.hpp"

namespace kaczmarz {

enum class MmFormat { Coordinate, Array };
enum class MmField { Real, Integer, Pattern };
enum class MmSymmetry { General, Symmetric };

struct MmHeader {
  MmFormat format = MmFormat::Coordinate;
  MmField field = MmField::Real;
  MmSymmetry symmetry = MmSymmetry::General;
};

// Parse result: entries are 0-based and symmetric storage already expanded;
// duplicates are preserved here and summed on conversion to CSR.
struct MmDocument {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<CsrMatrix::Triplet> entries;
  MmHeader header;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool next_content_line(std::istream& in, std::string& line,
                              std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t i = line.find_first_not_of(" \t\r\n");
    if (i == std::string::npos) continue;  // blank
    if (line[i] == '%') continue;          // comment
    return true;
  }
  return false;
}

inline double parse_number(const std::string& tok, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError(line_no, "bad numeric token '" + tok + "'");
  return v;
}

inline std::size_t parse_index(const std::string& tok, std::size_t limit,
                               std::size_t line_no) {
  char* end = nullptr;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || v < 1 ||
      static_cast<std::size_t>(v) > limit)
    throw ParseError(line_no, "index '" + tok + "' out of range");
  return static_cast<std::size_t>(v) - 1;  // to 0-based
}

}  // namespace detail

// Reads a MatrixMarket stream. Coordinate and array formats, real, integer
// and pattern fields, general and symmetric storage; everything else is
// rejected. Indices are converted to 0-based and symmetric files expanded to
// full storage.
inline MmDocument parse_matrix_market(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty stream");
  ++line_no;
  std::istringstream hs(detail::lower(line));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket")
    throw ParseError(line_no, "missing %%MatrixMarket banner");
  if (object != "matrix")
    throw ParseError(line_no, "unsupported object '" + object + "'");

  MmDocument doc;
  if (format == "coordinate")
    doc.header.format = MmFormat::Coordinate;
  else if (format == "array")
    doc.header.format = MmFormat::Array;
  else
    throw ParseError(line_no, "unsupported format '" + format + "'");

  if (field == "real")
    doc.header.field = MmField::Real;
  else if (field == "integer")
    doc.header.field = MmField::Integer;
  else if (field == "pattern")
    doc.header.field = MmField::Pattern;
  else if (field == "complex")
    throw UnsupportedFieldError("complex matrices are not supported");
  else
    throw ParseError(line_no, "unsupported field '" + field + "'");

  if (symmetry == "general")
    doc.header.symmetry = MmSymmetry::General;
  else if (symmetry == "symmetric")
    doc.header.symmetry = MmSymmetry::Symmetric;
  else
    throw UnsupportedFieldError("unsupported symmetry '" + symmetry + "'");

  if (doc.header.format == MmFormat::Array &&
      doc.header.field == MmField::Pattern)
    throw ParseError(line_no, "array format cannot carry a pattern field");

  if (!detail::next_content_line(in, line, line_no))
    throw ParseError(line_no + 1, "missing size line");
  std::istringstream ss(line);
  std::string tm, tn, tz;
  ss >> tm >> tn;
  if (tm.empty() || tn.empty()) throw ParseError(line_no, "bad size line");
  doc.rows = detail::parse_index(tm, static_cast<std::size_t>(-1), line_no) + 1;
  doc.cols = detail::parse_index(tn, static_cast<std::size_t>(-1), line_no) + 1;

  if (doc.header.format == MmFormat::Coordinate) {
    ss >> tz;
    if (tz.empty()) throw ParseError(line_no, "coordinate size line needs nnz");
    char* end = nullptr;
    const long long nnz_ll = std::strtoll(tz.c_str(), &end, 10);
    if (end == tz.c_str() || *end != '\0' || nnz_ll < 0)
      throw ParseError(line_no, "bad entry count '" + tz + "'");
    const auto nnz = static_cast<std::size_t>(nnz_ll);
    doc.entries.reserve(nnz * (doc.header.symmetry == MmSymmetry::Symmetric ? 2 : 1));
    for (std::size_t k = 0; k < nnz; ++k) {
      if (!detail::next_content_line(in, line, line_no))
        throw ParseError(line_no + 1, "unexpected end of file: expected " +
                                          std::to_string(nnz) + " entries");
      std::istringstream es(line);
      std::string ti, tj, tv;
      es >> ti >> tj;
      const std::size_t i = detail::parse_index(ti, doc.rows, line_no);
      const std::size_t j = detail::parse_index(tj, doc.cols, line_no);
      double v = 1.0;
      if (doc.header.field != MmField::Pattern) {
        es >> tv;
        if (tv.empty()) throw ParseError(line_no, "missing value");
        v = detail::parse_number(tv, line_no);
      }
      doc.entries.push_back({i, j, v});
      if (doc.header.symmetry == MmSymmetry::Symmetric && i != j)
        doc.entries.push_back({j, i, v});
    }
  } else {
    // Array data is column-major; symmetric files carry the lower triangle.
    if (doc.header.symmetry == MmSymmetry::Symmetric && doc.rows != doc.cols)
      throw ParseError(line_no, "symmetric array matrix must be square");
    for (std::size_t j = 0; j < doc.cols; ++j) {
      const std::size_t i0 =
          doc.header.symmetry == MmSymmetry::Symmetric ? j : 0;
      for (std::size_t i = i0; i < doc.rows; ++i) {
        if (!detail::next_content_line(in, line, line_no))
          throw ParseError(line_no + 1, "unexpected end of array data");
        std::istringstream es(line);
        std::string tv;
        es >> tv;
        const double v = detail::parse_number(tv, line_no);
        if (v != 0.0) {
          doc.entries.push_back({i, j, v});
          if (doc.header.symmetry == MmSymmetry::Symmetric && i != j)
            doc.entries.push_back({j, i, v});
        }
      }
    }
  }
  return doc;
}

inline CsrMatrix to_csr(const MmDocument& doc) {
  return CsrMatrix::from_triplets(doc.rows, doc.cols, doc.entries);
}

inline DenseMatrix to_dense(const MmDocument& doc) {
  DenseMatrix a(doc.rows, doc.cols);
  for (const auto& e : doc.entries) a(e.row, e.col) += e.value;
  return a;
}

namespace detail {

inline void put_value(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace detail

// Canonical writer: coordinate real general, 1-based, entries in row-major
// order. parse(write(parse(f))) equals parse(f) on the internal CSR form.
inline void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.nnz() << "\n";
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto idx = a.row_indices(i);
    auto val = a.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out << (i + 1) << " " << (idx[k] + 1) << " ";
      detail::put_value(out, val[k]);
      out << "\n";
    }
  }
}

inline void write_matrix_market(std::ostream& out, const DenseMatrix& a) {
  out << "%%MatrixMarket matrix array real general\n";
  out << a.rows() << " " << a.cols() << "\n";
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      detail::put_value(out, a(i, j));
      out << "\n";
    }
}

}  // namespace kaczmarz
