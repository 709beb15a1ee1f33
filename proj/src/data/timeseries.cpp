#include "nbrenc/data/timeseries.hpp"

#include "nbrenc/errors.hpp"

#include <cmath>

namespace nbrenc::data {

DenseMatrix sliding_windows(const DenseMatrix& series, std::size_t length, std::size_t step) {
  const auto t = static_cast<std::size_t>(series.rows());
  if (length == 0) throw InputError("window length must be positive");
  if (step == 0) throw InputError("window step must be positive");
  if (length > t) {
    throw InputError("window length " + std::to_string(length) + " exceeds series length " + std::to_string(t));
  }
  const std::size_t count = (t - length) / step + 1;
  const auto d = series.cols();
  const auto width = static_cast<Eigen::Index>(length) * d;
  DenseMatrix out(static_cast<Eigen::Index>(count), width);
  for (std::size_t w = 0; w < count; ++w) {
    // Row-major storage makes consecutive series rows one contiguous block.
    const float* src = series.data() + static_cast<Eigen::Index>(w * step) * d;
    std::copy(src, src + width, out.data() + static_cast<Eigen::Index>(w) * width);
  }
  return out;
}

std::vector<SeriesPiece> label_segments(const LabelVector& labels) {
  std::vector<SeriesPiece> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out.empty() || out.back().label != labels[i]) {
      out.push_back({i, i + 1, labels[i]});
    } else {
      out.back().end = i + 1;
    }
  }
  return out;
}

SegmentSplit split_halves_per_segment(const LabelVector& labels) {
  SegmentSplit split;
  for (const auto& seg : label_segments(labels)) {
    const std::size_t half = (seg.end - seg.begin) / 2;
    if (half > 0) split.train.push_back({seg.begin, seg.begin + half, seg.label});
    if (seg.begin + half < seg.end) split.test.push_back({seg.begin + half, seg.end, seg.label});
  }
  return split;
}

LabeledDataset windows_from_pieces(const DenseMatrix& series, const std::vector<SeriesPiece>& pieces,
                                   std::size_t length, std::size_t step) {
  if (length == 0) throw InputError("window length must be positive");
  if (step == 0) throw InputError("window step must be positive");
  const auto d = series.cols();
  const auto width = static_cast<Eigen::Index>(length) * d;
  std::vector<std::size_t> starts;
  LabelVector labels;
  for (const auto& p : pieces) {
    if (p.end > static_cast<std::size_t>(series.rows()) || p.begin > p.end) {
      throw InputError("series piece out of range");
    }
    if (p.end - p.begin < length) continue;
    for (std::size_t s = p.begin; s + length <= p.end; s += step) {
      starts.push_back(s);
      labels.push_back(p.label);
    }
  }
  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(starts.size()), width);
  for (std::size_t w = 0; w < starts.size(); ++w) {
    const float* src = series.data() + static_cast<Eigen::Index>(starts[w]) * d;
    std::copy(src, src + width, ds.features.data() + static_cast<Eigen::Index>(w) * width);
  }
  ds.labels = std::move(labels);
  ds.source_index = std::move(starts);
  return ds;
}

WindowNormalizer fit_window_normalizer(const DenseMatrix& windows, std::size_t dims) {
  if (dims == 0 || windows.cols() % static_cast<Eigen::Index>(dims) != 0) {
    throw InputError("window width is not a multiple of the series dimension");
  }
  if (windows.rows() == 0) throw InputError("cannot fit a normalizer on zero windows");
  WindowNormalizer norm;
  norm.dims = dims;
  norm.mean.assign(dims, 0.0);
  norm.stddev.assign(dims, 0.0);
  std::vector<double> sq(dims, 0.0);
  const std::size_t total = static_cast<std::size_t>(windows.size());
  for (std::size_t i = 0; i < total; ++i) {
    const double v = windows.data()[i];
    norm.mean[i % dims] += v;
    sq[i % dims] += v * v;
  }
  const double count = static_cast<double>(total / dims);
  for (std::size_t j = 0; j < dims; ++j) {
    norm.mean[j] /= count;
    const double var = std::max(0.0, sq[j] / count - norm.mean[j] * norm.mean[j]);
    const double sd = std::sqrt(var);
    norm.stddev[j] = sd > 1e-12 ? sd : 1.0;
  }
  return norm;
}

void WindowNormalizer::apply(DenseMatrix& windows) const {
  if (dims == 0 || windows.cols() % static_cast<Eigen::Index>(dims) != 0) {
    throw DimensionError("window width is not a multiple of the normalizer dimension");
  }
  const std::size_t total = static_cast<std::size_t>(windows.size());
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t j = i % dims;
    windows.data()[i] = static_cast<float>((windows.data()[i] - mean[j]) / stddev[j]);
  }
}

FeatureScaling WindowNormalizer::scaling(std::size_t length) const {
  FeatureScaling s;
  s.kind = FeatureScaling::Kind::zscore;
  for (std::size_t t = 0; t < length; ++t) {
    s.a.insert(s.a.end(), mean.begin(), mean.end());
    s.b.insert(s.b.end(), stddev.begin(), stddev.end());
  }
  return s;
}

WindowedSplit windowed_split(const DenseMatrix& series, const LabelVector& labels, std::size_t length,
                             std::size_t step, bool normalize) {
  if (labels.size() != static_cast<std::size_t>(series.rows())) {
    throw InputError("series has " + std::to_string(series.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  const SegmentSplit split = split_halves_per_segment(labels);
  WindowedSplit out;
  out.train = windows_from_pieces(series, split.train, length, step);
  out.test = windows_from_pieces(series, split.test, length, step);
  if (normalize) {
    out.normalizer = fit_window_normalizer(out.train.features, static_cast<std::size_t>(series.cols()));
    out.normalizer.apply(out.train.features);
    if (out.test.size() > 0) out.normalizer.apply(out.test.features);
    out.train.scaling = out.normalizer.scaling(length);
    out.test.scaling = out.train.scaling;
  }
  return out;
}

}  // namespace nbrenc::data
