#pragma once

#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <vector>

namespace nbrenc::evaluation {

struct KMeansOptions {
  std::size_t clusters = 10;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  std::size_t restarts = 10;
};

struct KMeansResult {
  LabelVector labels;
  Matrix<double> centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after every Lloyd iteration of the kept run.
  std::vector<double> inertia_history;
};

// k-means++ seeding followed by Lloyd iterations until the assignment is a
// fixed point or max_iter is reached; lowest-inertia restart wins. An empty
// cluster takes the point of the largest cluster farthest from its centroid.
KMeansResult kmeans(const DenseMatrix& points, const KMeansOptions& options);

LabelVector kmeans(const DenseMatrix& points, std::size_t k, std::uint64_t seed,
                   std::size_t max_iter = 300);

}  // namespace nbrenc::evaluation
