#include "nbrenc/data/dataset.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/evaluation/protocol.hpp"

#include <vector>

namespace nbrenc::data {

void LabeledDataset::validate() const {
  if (labels && labels->size() != size()) {
    throw InputError("dataset has " + std::to_string(size()) + " rows but " + std::to_string(labels->size()) +
                     " labels");
  }
  if (!source_index.empty() && source_index.size() != size()) {
    throw InputError("dataset source index length does not match its row count");
  }
  if (!features.allFinite()) throw InputError("dataset contains non-finite features");
}

LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= ds.size()) throw InputError("row " + std::to_string(r) + " out of range");
  }
  LabeledDataset out;
  out.features = gather_rows(ds.features, rows);
  out.scaling = ds.scaling;
  if (ds.labels) {
    LabelVector labels;
    labels.reserve(rows.size());
    for (std::size_t r : rows) labels.push_back((*ds.labels)[r]);
    out.labels = std::move(labels);
  }
  out.source_index.reserve(rows.size());
  for (std::size_t r : rows) out.source_index.push_back(ds.source_index.empty() ? r : ds.source_index[r]);
  return out;
}

LabeledDataset select_columns(const LabeledDataset& ds, std::span<const std::size_t> columns) {
  std::vector<bool> used(ds.dims(), false);
  for (std::size_t c : columns) {
    if (c >= ds.dims()) throw InputError("column " + std::to_string(c) + " out of range (" +
                                         std::to_string(ds.dims()) + " columns)");
    if (used[c]) throw InputError("column " + std::to_string(c) + " selected twice");
    used[c] = true;
  }
  LabeledDataset out;
  out.labels = ds.labels;
  out.source_index = ds.source_index;
  out.features.resize(ds.features.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.features.col(static_cast<Eigen::Index>(j)) = ds.features.col(static_cast<Eigen::Index>(columns[j]));
  }
  out.scaling.kind = ds.scaling.kind;
  if (ds.scaling.a.size() == ds.dims()) {
    for (std::size_t c : columns) {
      out.scaling.a.push_back(ds.scaling.a[c]);
      out.scaling.b.push_back(ds.scaling.b[c]);
    }
  } else {
    out.scaling.a = ds.scaling.a;
    out.scaling.b = ds.scaling.b;
  }
  return out;
}

LabeledDataset stratified_subset(const LabeledDataset& ds, std::size_t size, std::uint64_t seed) {
  if (!ds.labels) throw InputError("stratified subset needs labels");
  const auto rows = evaluation::stratified_subsample(*ds.labels, size, seed);
  return select_rows(ds, std::span<const std::size_t>(rows));
}

}  // namespace nbrenc::data
