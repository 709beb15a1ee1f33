#include "nbrenc/evaluation/protocol.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nbrenc::evaluation {

std::vector<std::size_t> stratified_subsample(const LabelVector& labels, std::size_t size,
                                              std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n == 0) throw InputError("cannot subsample an empty label set");
  if (size > n) throw InputError("subsample size " + std::to_string(size) + " exceeds " + std::to_string(n));
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) throw InputError("negative label");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t present = 0;
  for (const auto& m : members) present += m.empty() ? 0 : 1;
  if (size < present) {
    throw InputError("subsample size " + std::to_string(size) + " is below the class count " + std::to_string(present));
  }
  if (size == n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }

  std::vector<double> quota(members.size());
  std::vector<std::size_t> alloc(members.size(), 0);
  std::size_t total = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    quota[c] = static_cast<double>(size) * static_cast<double>(members[c].size()) / static_cast<double>(n);
    alloc[c] = std::min(members[c].size(), std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(quota[c]))));
    total += alloc[c];
  }
  while (total < size) {
    std::size_t pick = members.size();
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (alloc[c] >= members[c].size()) continue;
      if (pick == members.size() || quota[c] - alloc[c] > quota[pick] - alloc[pick]) pick = c;
    }
    ++alloc[pick];
    ++total;
  }
  while (total > size) {
    std::size_t pick = members.size();
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (alloc[c] <= 1) continue;
      if (pick == members.size() || quota[c] - alloc[c] < quota[pick] - alloc[pick]) pick = c;
    }
    --alloc[pick];
    --total;
  }

  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(size);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto pool = members[c];
    fisher_yates(pool, rng);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(alloc[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MetricsRecord> semisupervised_protocol(const DenseMatrix& train_repr,
                                                   const LabelVector& train_labels,
                                                   const DenseMatrix& test_repr,
                                                   const LabelVector& test_labels,
                                                   const ProtocolOptions& options) {
  if (static_cast<std::size_t>(train_repr.rows()) != train_labels.size() ||
      static_cast<std::size_t>(test_repr.rows()) != test_labels.size()) {
    throw InputError("representation/label count mismatch");
  }
  if (train_repr.cols() != test_repr.cols()) throw DimensionError("train/test representation widths differ");
  std::vector<std::size_t> sizes = options.sizes;
  std::vector<std::uint64_t> seeds = options.seeds;
  std::sort(sizes.begin(), sizes.end());
  std::sort(seeds.begin(), seeds.end());

  std::vector<MetricsRecord> out;
  for (std::size_t size : sizes) {
    for (std::uint64_t seed : seeds) {
      const auto picked = stratified_subsample(train_labels, size, seed);
      LabelVector y(picked.size());
      for (std::size_t i = 0; i < picked.size(); ++i) y[i] = train_labels[picked[i]];
      const DenseMatrix x = gather_rows(train_repr, std::span<const std::size_t>(picked));
      SvmOptions svm = options.svm;
      svm.seed = seed;
      const LinearSvm model = train_linear_svm(x, y, svm);
      const double err = error_rate(model.predict(test_repr), test_labels);
      out.push_back(MetricsRecord{options.experiment, seed, size, "error_rate", err});
    }
  }
  return out;
}

}  // namespace nbrenc::evaluation
