#include "nbrenc/data/loaders.hpp"

#include "nbrenc/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace nbrenc::data {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

double parse_number(std::string_view field, std::size_t line) {
  const std::string s(trim(field));
  if (s.empty()) throw ParseError("empty field", line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw ParseError("not a number: '" + s + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + s + "'", line);
  return v;
}

long long parse_integer(std::string_view field, std::size_t line) {
  const std::string s(trim(field));
  if (s.empty()) throw ParseError("empty field", line);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw ParseError("not an integer: '" + s + "'", line);
  return v;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl;
    ++line_no;
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    if (!skippable(line)) fn(line, line_no);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

LabeledDataset parse_dense_csv(const std::string& text, bool has_labels) {
  std::vector<double> values;
  LabelVector labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      width = fields.size();
      if (has_labels && width < 2) throw ParseError("labeled rows need at least one feature and a label", line_no);
    } else if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    const std::size_t features = has_labels ? width - 1 : width;
    for (std::size_t i = 0; i < features; ++i) values.push_back(parse_number(fields[i], line_no));
    if (has_labels) {
      const long long label = parse_integer(fields.back(), line_no);
      if (label < 0 || label > 1'000'000'000) throw ParseError("label out of range", line_no);
      labels.push_back(static_cast<int>(label));
    }
    ++rows;
  });
  const std::size_t features = rows == 0 ? 0 : (has_labels ? width - 1 : width);
  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(features));
  for (std::size_t i = 0; i < values.size(); ++i) ds.features.data()[i] = static_cast<float>(values[i]);
  if (!ds.features.allFinite()) throw FormatError("values overflow 32-bit floats");
  if (has_labels) ds.labels = std::move(labels);
  return ds;
}

LabeledDataset load_dense_csv(const std::filesystem::path& path, bool has_labels) {
  return parse_dense_csv(read_file(path), has_labels);
}

LabelVector load_labels(const std::filesystem::path& path) {
  LabelVector labels;
  for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
    const long long v = parse_integer(line, line_no);
    if (v < 0 || v > 1'000'000'000) throw ParseError("label out of range", line_no);
    labels.push_back(static_cast<int>(v));
  });
  return labels;
}

DenseMatrix SparseMatrix::densify() const {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (const auto& t : triplets) {
    out(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = static_cast<float>(t.value);
  }
  return out;
}

SparseMatrix parse_sparse_triplets(const std::string& text, std::size_t rows, std::size_t cols) {
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  std::vector<std::size_t> lines;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    std::istringstream in{std::string(line)};
    std::string r, c, v, extra;
    if (!(in >> r >> c >> v) || (in >> extra)) throw ParseError("expected 'row col value'", line_no);
    const long long row = parse_integer(r, line_no);
    const long long col = parse_integer(c, line_no);
    if (row < 0 || col < 0 || static_cast<std::size_t>(row) >= rows || static_cast<std::size_t>(col) >= cols) {
      throw FormatError("triplet (" + r + ", " + c + ") outside a " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " matrix (line " + std::to_string(line_no) + ")");
    }
    m.triplets.push_back({static_cast<std::size_t>(row), static_cast<std::size_t>(col), parse_number(v, line_no)});
    lines.push_back(line_no);
  });
  std::vector<std::size_t> order(m.triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = m.triplets[a];
    const auto& tb = m.triplets[b];
    return ta.row != tb.row ? ta.row < tb.row : ta.col < tb.col;
  });
  std::vector<Triplet> sorted;
  sorted.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Triplet& t = m.triplets[order[i]];
    if (!sorted.empty() && sorted.back().row == t.row && sorted.back().col == t.col) {
      throw FormatError("duplicate triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ") on line " +
                        std::to_string(lines[order[i]]));
    }
    sorted.push_back(t);
  }
  m.triplets = std::move(sorted);
  return m;
}

SparseMatrix load_sparse_triplets(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  return parse_sparse_triplets(read_file(path), rows, cols);
}

}  // namespace nbrenc::data
