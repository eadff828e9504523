#pragma once

// Matrix Market and dense CSV ingestion, Matrix Market output, and an
// atomic whole-file writer.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lamc/error.hpp"
#include "lamc/matrix.hpp"

namespace lamc {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <class Int>
bool parse_int(std::string_view field, Int& out) {
  field = trim(field);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return !field.empty() && ec == std::errc() && ptr == end;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const auto b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line,
                                    const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

[[noreturn]] inline void value_fail(const std::string& path, std::size_t line,
                                    double v) {
  std::ostringstream os;
  os << path << ":" << line << ": entry value " << v
     << " is not a finite nonnegative number";
  throw DomainError(os.str());
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace detail

// Reads a real/integer/pattern, general Matrix Market file. Coordinate files
// yield sparse storage, array files dense storage.
inline DataMatrix load_matrix_market(const std::string& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) detail::parse_fail(path, 1, "empty file");
  ++lineno;
  const auto banner = detail::split_ws(line);
  if (banner.size() != 5 || detail::lower(banner[0]) != "%%matrixmarket" ||
      detail::lower(banner[1]) != "matrix") {
    detail::parse_fail(path, lineno, "missing %%MatrixMarket matrix header");
  }
  const auto format = detail::lower(banner[2]);
  const auto field = detail::lower(banner[3]);
  const auto symmetry = detail::lower(banner[4]);
  if (format != "coordinate" && format != "array")
    detail::parse_fail(path, lineno, "unknown format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double" &&
      !(field == "pattern" && format == "coordinate"))
    detail::parse_fail(path, lineno, "unsupported field '" + field + "'");
  if (symmetry != "general")
    detail::parse_fail(path, lineno, "unsupported symmetry '" + symmetry + "'");

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      const auto t = detail::trim(out);
      if (t.empty() || t.front() == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) detail::parse_fail(path, lineno, "missing size line");
  const auto size_fields = detail::split_ws(line);
  Index rows = 0, cols = 0, entries = 0;
  if (format == "coordinate") {
    if (size_fields.size() != 3 || !detail::parse_int(size_fields[0], rows) ||
        !detail::parse_int(size_fields[1], cols) ||
        !detail::parse_int(size_fields[2], entries) || entries < 0)
      detail::parse_fail(path, lineno, "malformed size line");
  } else {
    if (size_fields.size() != 2 || !detail::parse_int(size_fields[0], rows) ||
        !detail::parse_int(size_fields[1], cols))
      detail::parse_fail(path, lineno, "malformed size line");
  }
  if (rows < 1 || cols < 1) detail::parse_fail(path, lineno, "dimensions must be positive");

  if (format == "array") {
    DenseMatrix values(rows, cols);
    // column-major order
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) {
        if (!next_data_line(line))
          detail::parse_fail(path, lineno, "fewer values than declared");
        double v = 0.0;
        if (!detail::parse_double(line, v))
          detail::parse_fail(path, lineno, "malformed value");
        if (!std::isfinite(v) || v < 0.0) detail::value_fail(path, lineno, v);
        values(r, c) = v;
      }
    }
    if (next_data_line(line)) detail::parse_fail(path, lineno, "more values than declared");
    return DataMatrix::from_dense(std::move(values));
  }

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(entries));
  const bool pattern = field == "pattern";
  for (Index e = 0; e < entries; ++e) {
    if (!next_data_line(line))
      detail::parse_fail(path, lineno, "fewer entries than declared");
    const auto f = detail::split_ws(line);
    Index r = 0, c = 0;
    double v = 1.0;
    if (f.size() != (pattern ? 2u : 3u) || !detail::parse_int(f[0], r) ||
        !detail::parse_int(f[1], c) || (!pattern && !detail::parse_double(f[2], v)))
      detail::parse_fail(path, lineno, "malformed entry");
    if (r < 1 || r > rows || c < 1 || c > cols)
      detail::parse_fail(path, lineno, "entry index out of range");
    if (!std::isfinite(v) || v < 0.0) detail::value_fail(path, lineno, v);
    triplets.emplace_back(r - 1, c - 1, v);
  }
  if (next_data_line(line)) detail::parse_fail(path, lineno, "more entries than declared");
  try {
    return DataMatrix::from_triplets(rows, cols, triplets);
  } catch (const DomainError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Rectangular numeric CSV; an optional single header row is skipped.
inline DataMatrix load_dense_csv(const std::string& path, bool has_header) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (lineno == 1 && has_header) continue;
    if (detail::trim(line).empty()) continue;
    Index count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      const auto field = rest.substr(0, comma);
      double v = 0.0;
      if (!detail::parse_double(field, v))
        detail::parse_fail(path, lineno, "non-numeric field '" +
                                             std::string(detail::trim(field)) + "'");
      if (!std::isfinite(v) || v < 0.0) detail::value_fail(path, lineno, v);
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cols < 0) {
      cols = count;
    } else if (count != cols) {
      detail::parse_fail(path, lineno, "ragged row: " + std::to_string(count) +
                                           " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) detail::parse_fail(path, lineno, "no data rows");
  DenseMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return DataMatrix::from_dense(std::move(m));
}

// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

// Sparse storage is written in coordinate format, dense in array format.
inline std::string to_matrix_market(const DataMatrix& m) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  if (m.is_dense()) {
    os << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
    const auto& d = m.dense();
    for (Index c = 0; c < d.cols(); ++c)
      for (Index r = 0; r < d.rows(); ++r) os << d(r, c) << '\n';
  } else {
    os << "%%MatrixMarket matrix coordinate real general\n"
       << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
    m.for_each_nonzero([&](Index r, Index c, double v) {
      os << r + 1 << ' ' << c + 1 << ' ' << v << '\n';
    });
  }
  return os.str();
}

inline void write_matrix_market(const DataMatrix& m, const std::string& path) {
  write_file_atomic(path, to_matrix_market(m));
}

}  // namespace lamc
