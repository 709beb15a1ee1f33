#pragma once

#include "nbrenc/evaluation/metrics.hpp"
#include "nbrenc/evaluation/svm.hpp"
#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nbrenc::evaluation {

// `size` indices drawn per class in proportion to class frequency, at least
// one per class, sorted ascending. size == labels.size() returns every index.
std::vector<std::size_t> stratified_subsample(const LabelVector& labels, std::size_t size,
                                              std::uint64_t seed);

struct ProtocolOptions {
  std::string experiment = "semisup";
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds;
  SvmOptions svm;
};

// For each (size, seed): subsample the labeled training representations,
// fit the SVM, record the test error. Output sorted by (size, seed).
std::vector<MetricsRecord> semisupervised_protocol(const DenseMatrix& train_repr,
                                                   const LabelVector& train_labels,
                                                   const DenseMatrix& test_repr,
                                                   const LabelVector& test_labels,
                                                   const ProtocolOptions& options);

}  // namespace nbrenc::evaluation
