#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcca/signals.hpp"

namespace gcca::csv {

/// Shortest-round-trip-safe decimal text (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_rows(std::ostream& os, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

/// One row per channel, preceded by `# channels=C samples=N`.
inline void write_signal(std::ostream& os, const SignalMatrix& x) {
  os << "# channels=" << x.channel_count() << " samples=" << x.sample_count() << '\n';
  write_rows(os, x.data());
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << "# rows=" << m.rows() << " cols=" << m.cols() << '\n';
  write_rows(os, m);
}

namespace detail {

inline bool header_value(const std::string& header, const std::string& key, long& value) {
  const auto pos = header.find(key + "=");
  if (pos == std::string::npos) return false;
  value = std::strtol(header.c_str() + pos + key.size() + 1, nullptr, 10);
  return true;
}

}  // namespace detail

/// Parses comma-separated rows. A leading `# channels=C samples=N` or
/// `# rows=R cols=C` header is optional; when present the shape is checked.
inline Matrix read_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  long expect_rows = -1, expect_cols = -1;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      long v = 0;
      if (detail::header_value(line, "channels", v) || detail::header_value(line, "rows", v)) expect_rows = v;
      if (detail::header_value(line, "samples", v) || detail::header_value(line, "cols", v)) expect_cols = v;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == cell.c_str() || (end && *end != '\0'))
        throw std::invalid_argument("csv: malformed number '" + cell + "' on line " + std::to_string(line_no));
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("csv: ragged row on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("csv: no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  if ((expect_rows >= 0 && expect_rows != m.rows()) || (expect_cols >= 0 && expect_cols != m.cols()))
    throw std::invalid_argument("csv: header shape does not match data");
  return m;
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return read_matrix(in);
}

inline SignalMatrix load_signal(const std::string& path) { return SignalMatrix(load_matrix(path)); }

inline void save_signal(const std::string& path, const SignalMatrix& x) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  write_signal(out, x);
}

inline void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  write_matrix(out, m);
}

}  // namespace gcca::csv
