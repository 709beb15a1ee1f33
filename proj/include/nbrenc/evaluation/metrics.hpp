#pragma once

#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nbrenc::evaluation {

// Pair-counting adjusted Rand index. Returns 1 when both labelings are the
// same trivial partition (all singletons or one cluster).
double adjusted_rand_index(const LabelVector& a, const LabelVector& b);

// I(a; b) / sqrt(H(a) H(b)). 1 when both labelings are constant, 0 when only
// one of them is.
double normalized_mutual_information(const LabelVector& a, const LabelVector& b);

// Best cluster->class bijection's matched fraction (Hungarian on negated
// contingency counts, padded to square).
double clustering_accuracy(const LabelVector& pred, const LabelVector& truth);

// counts(i, j) = #{n : a[n] == i && b[n] == j}.
Matrix<double> contingency_table(const LabelVector& a, const LabelVector& b);

struct MetricsRecord {
  std::string experiment;
  std::uint64_t seed = 0;
  std::optional<std::size_t> size;
  std::string metric;  // ARI, NMI, ACC or error_rate
  double value = 0.0;
};

inline constexpr const char* kMetricsHeader = "experiment,seed,size,metric,value";

// Header line plus one row per record; values with 6 decimals, `\n` endings.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

}  // namespace nbrenc::evaluation
