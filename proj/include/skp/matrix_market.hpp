#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "skp/error.hpp"
#include "skp/matrix.hpp"

namespace skp {

struct MmEntry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

struct MmData {
  Index rows = 0;
  Index cols = 0;
  std::vector<MmEntry> entries;  // 0-based, symmetric part already expanded
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline parse_error at_line(const std::string& name, long line, const std::string& msg) {
  std::ostringstream os;
  os << name << ":" << line << ": " << msg;
  return parse_error(os.str());
}

}  // namespace detail

/// Parses Matrix Market coordinate data (real, integer, or pattern; general
/// or symmetric). 1-based indices become 0-based, symmetric storage is
/// expanded, pattern entries become 1.0. Array (dense) files and complex
/// fields are not handled here.
inline MmData read_matrix_market(std::istream& in, const std::string& name = "<stream>") {
  long line_no = 0;
  std::string line;
  if (!std::getline(in, line)) throw detail::at_line(name, 1, "empty file");
  ++line_no;

  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket")
    throw detail::at_line(name, line_no, "missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix")
    throw detail::at_line(name, line_no, "object '" + object + "' is not a matrix");
  if (format == "array") throw unsupported(name + ": array (dense) format is not handled");
  if (format != "coordinate")
    throw detail::at_line(name, line_no, "unknown format '" + format + "'");
  const bool pattern = field == "pattern";
  if (field == "complex") throw unsupported(name + ": complex fields are not handled");
  if (!pattern && field != "real" && field != "integer")
    throw detail::at_line(name, line_no, "unknown field '" + field + "'");
  const bool symmetric = symmetry == "symmetric";
  if (symmetry == "skew-symmetric" || symmetry == "hermitian")
    throw unsupported(name + ": symmetry '" + symmetry + "' is not handled");
  if (!symmetric && symmetry != "general")
    throw detail::at_line(name, line_no, "unknown symmetry '" + symmetry + "'");

  // size line, past comments and blanks
  Index rows = 0, cols = 0;
  long declared = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    long r = 0, c = 0, nz = 0;
    if (!(ss >> r >> c >> nz) || r < 0 || c < 0 || nz < 0)
      throw detail::at_line(name, line_no, "malformed size line '" + line + "'");
    rows = static_cast<Index>(r);
    cols = static_cast<Index>(c);
    declared = nz;
    break;
  }
  if (declared < 0) throw detail::at_line(name, line_no, "missing size line");
  if (symmetric && rows != cols)
    throw detail::at_line(name, line_no, "symmetric matrix must be square");

  MmData out;
  out.rows = rows;
  out.cols = cols;
  out.entries.reserve(static_cast<std::size_t>(declared) * (symmetric ? 2 : 1));
  long seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    long r = 0, c = 0;
    double v = 1.0;
    if (!(ss >> r >> c)) throw detail::at_line(name, line_no, "malformed entry '" + line + "'");
    if (!pattern && !(ss >> v))
      throw detail::at_line(name, line_no, "entry is missing its value");
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw detail::at_line(name, line_no, "index out of range");
    ++seen;
    if (seen > declared) throw detail::at_line(name, line_no, "more entries than declared");
    out.entries.push_back({static_cast<Index>(r - 1), static_cast<Index>(c - 1), v});
    if (symmetric && r != c)
      out.entries.push_back({static_cast<Index>(c - 1), static_cast<Index>(r - 1), v});
  }
  if (seen != declared) {
    std::ostringstream os;
    os << "declared " << declared << " entries but found " << seen;
    throw detail::at_line(name, line_no, os.str());
  }
  return out;
}

inline Mat to_matrix(const MmData& data) {
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(data.entries.size());
  for (const auto& e : data.entries) ts.emplace_back(e.row, e.col, e.value);
  return Mat::from_triplets(data.rows, data.cols, ts);
}

inline Mat load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path + ": cannot open file");
  return to_matrix(read_matrix_market(in, path));
}

/// Stored-entry count as declared by the file (before symmetric expansion).
inline std::size_t stored_entries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(path + ": cannot open file");
  std::string line;
  long line_no = 0;
  bool banner_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!banner_seen) {
      banner_seen = true;
      continue;
    }
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    long r, c, nz;
    if (!(ss >> r >> c >> nz))
      throw detail::at_line(path, line_no, "malformed size line '" + line + "'");
    return static_cast<std::size_t>(nz);
  }
  throw detail::at_line(path, line_no, "missing size line");
}

inline void write_matrix_market(std::ostream& out, const Mat& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  std::vector<MmEntry> entries;
  if (a.is_dense()) {
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j)
        if (a.dense()(i, j) != 0.0) entries.push_back({i, j, a.dense()(i, j)});
  } else {
    for (Index i = 0; i < a.sparse().outerSize(); ++i)
      for (CsrMat::InnerIterator it(a.sparse(), i); it; ++it)
        entries.push_back({it.row(), it.col(), it.value()});
  }
  out << a.rows() << " " << a.cols() << " " << entries.size() << "\n";
  char buf[128];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%lld %lld %.17g\n",
                  static_cast<long long>(e.row + 1), static_cast<long long>(e.col + 1),
                  e.value);
    out << buf;
  }
}

inline void write_matrix_market(const std::string& path, const Mat& a) {
  std::ofstream out(path);
  if (!out) throw parse_error(path + ": cannot open file for writing");
  write_matrix_market(out, a);
}

}  // namespace skp
