#pragma once

#include "nbrenc/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace nbrenc::neighbors {

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  // Euclidean
  bool operator==(const Neighbor&) const = default;
};

// Squared Euclidean distance: float partial sums in fixed lanes, reduced in
// double in a fixed order. Every search path goes through this function, so the tree and the
// brute-force scan agree bit for bit.
double squared_distance(std::span<const float> a, std::span<const float> b);

// Exact k-d tree over the rows of a matrix. Splits on the dimension of
// largest spread at the median; leaves hold at most `leaf_capacity` points
// unless every remaining point coincides. Immutable after construction and
// safe for concurrent queries.
class KdTree {
 public:
  explicit KdTree(DenseMatrix points, std::size_t leaf_capacity = 16);

  // k nearest rows to row `row`, ascending by distance, ties by index.
  std::vector<Neighbor> query(std::size_t row, std::size_t k, bool exclude_self) const;
  // k nearest rows to an external point.
  std::vector<Neighbor> query(std::span<const float> point, std::size_t k) const;

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(points_.cols()); }
  std::size_t leaf_capacity() const { return leaf_capacity_; }
  const DenseMatrix& points() const { return points_; }

  // Point ids of each leaf, in tree order.
  std::vector<std::vector<std::size_t>> leaves() const;

 private:
  struct Node {
    std::size_t split_dim = 0;
    float split_value = 0.0f;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t begin = 0;  // leaf range into ids_
    std::size_t end = 0;
    bool leaf = true;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  std::vector<Neighbor> search(std::span<const float> point, std::size_t k, std::size_t skip) const;

  DenseMatrix points_;
  std::size_t leaf_capacity_;
  std::vector<std::size_t> ids_;
  std::vector<Node> nodes_;
};

KdTree build_kdtree(const DenseMatrix& points, std::size_t leaf_capacity = 16);

std::vector<Neighbor> query_knn(const KdTree& index, std::size_t row, std::size_t k,
                                bool exclude_self);
std::vector<Neighbor> query_knn(const KdTree& index, std::span<const float> point, std::size_t k);

// k nearest rows of every row (self excluded), same order and tie rule as
// query_knn. Low-dimensional data go through a k-d tree; above
// `kAllKnnTreeMaxDims` dimensions the tree prunes almost nothing, so a
// cache-blocked exhaustive scan over the same distance function is used.
inline constexpr std::size_t kAllKnnTreeMaxDims = 32;
std::vector<std::vector<Neighbor>> all_knn(const DenseMatrix& points, std::size_t k);

// O(n d) scan with the same contract as query_knn; the test oracle.
std::vector<Neighbor> brute_force_knn(const DenseMatrix& points, std::size_t row, std::size_t k,
                                      bool exclude_self);
std::vector<Neighbor> brute_force_knn(const DenseMatrix& points, std::span<const float> point,
                                      std::size_t k);

}  // namespace nbrenc::neighbors
