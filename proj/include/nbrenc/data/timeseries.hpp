#pragma once

#include "nbrenc/data/dataset.hpp"

#include <vector>

namespace nbrenc::data {

// Flattened windows of `length` consecutive rows taken every `step` rows:
// (floor((T - length) / step) + 1) rows of length * d values, time-major.
// Throws InputError when length is 0 or exceeds T, or step is 0.
DenseMatrix sliding_windows(const DenseMatrix& series, std::size_t length, std::size_t step);

// A contiguous run of raw rows [begin, end) with one label.
struct SeriesPiece {
  std::size_t begin = 0;
  std::size_t end = 0;
  int label = 0;
  bool operator==(const SeriesPiece&) const = default;
};

// Contiguous runs of equal labels.
std::vector<SeriesPiece> label_segments(const LabelVector& labels);

struct SegmentSplit {
  std::vector<SeriesPiece> train;  // first floor(len/2) rows of each segment
  std::vector<SeriesPiece> test;   // remaining rows
};

// Splits every segment into halves. Empty halves (segments of one row) are
// dropped.
SegmentSplit split_halves_per_segment(const LabelVector& labels);

// Windows cut inside each piece only, so no window crosses a piece
// boundary. Labels are the piece labels; source_index holds the raw start
// row of every window.
LabeledDataset windows_from_pieces(const DenseMatrix& series, const std::vector<SeriesPiece>& pieces,
                                   std::size_t length, std::size_t step);

// Per-dimension z-normalization of flattened windows whose rows are
// `length` time steps of `dims` values.
struct WindowNormalizer {
  std::size_t dims = 0;
  std::vector<double> mean;
  std::vector<double> stddev;  // 1 where the training spread is zero

  void apply(DenseMatrix& windows) const;
  FeatureScaling scaling(std::size_t length) const;
};

WindowNormalizer fit_window_normalizer(const DenseMatrix& windows, std::size_t dims);

struct WindowedSplit {
  LabeledDataset train;
  LabeledDataset test;
  WindowNormalizer normalizer;
};

// Per-segment halves, windows inside each half, normalizer fit on the
// training windows and applied to both.
WindowedSplit windowed_split(const DenseMatrix& series, const LabelVector& labels, std::size_t length,
                             std::size_t step, bool normalize = true);

}  // namespace nbrenc::data
