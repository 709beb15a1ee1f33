#pragma once

#include "nbrenc/data/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nbrenc::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// IDX image file (u8 pixels, any number of dimensions after the count) and
// matching label file. Pixels are divided by 255. Throws FormatError on a bad
// magic, ConsistencyError when the counts differ and IoError on truncation.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// Same from in-memory bytes; `load_idx` reads the files and calls this.
LabeledDataset parse_idx(const std::string& image_bytes, const std::string& label_bytes);

// Comma-separated numbers. Blank lines and lines starting with `#` are
// skipped. With `has_labels` the last column is an integer label. Ragged or
// non-numeric rows raise ParseError naming the 1-based line.
LabeledDataset load_dense_csv(const std::filesystem::path& path, bool has_labels);
LabeledDataset parse_dense_csv(const std::string& text, bool has_labels);

// One integer label per line (blank lines and `#` comments skipped).
LabelVector load_labels(const std::filesystem::path& path);

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  bool operator==(const Triplet&) const = default;
};

struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Triplet> triplets;  // sorted by (row, col), no duplicates

  DenseMatrix densify() const;
};

// `row col value` per line, 0-indexed, whitespace separated. FormatError on
// an out-of-range index, duplicate coordinate or non-finite value;
// ParseError on malformed lines.
SparseMatrix load_sparse_triplets(const std::filesystem::path& path, std::size_t rows, std::size_t cols);
SparseMatrix parse_sparse_triplets(const std::string& text, std::size_t rows, std::size_t cols);

// Whole file as bytes; IoError when unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace nbrenc::data
