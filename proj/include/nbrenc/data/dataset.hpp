#pragma once

#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nbrenc::data {

// How raw values were mapped onto the stored features. For min/max the
// stored value is (raw - a) / (b - a); for z-scores it is (raw - a) / b.
struct FeatureScaling {
  enum class Kind { none, minmax, zscore };
  Kind kind = Kind::none;
  std::vector<double> a;
  std::vector<double> b;
  bool operator==(const FeatureScaling&) const = default;
};

struct LabeledDataset {
  DenseMatrix features;
  std::optional<LabelVector> labels;
  FeatureScaling scaling;
  // Row of the original source each feature row came from (for windows: the
  // raw index of the first time step). Empty when rows are the source rows.
  std::vector<std::size_t> source_index;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
  // Throws InputError when labels or source indices disagree with the row
  // count, or a feature is non-finite.
  void validate() const;
};

// Rows in the listed order; labels and source indices follow along.
LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows);

// Keeps the listed columns in the listed order. Throws InputError on an
// out-of-range or repeated column.
LabeledDataset select_columns(const LabeledDataset& ds, std::span<const std::size_t> columns);

// Class-stratified subset of `size` rows (requires labels).
LabeledDataset stratified_subset(const LabeledDataset& ds, std::size_t size, std::uint64_t seed);

}  // namespace nbrenc::data
