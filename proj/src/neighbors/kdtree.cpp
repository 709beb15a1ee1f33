#include "nbrenc/neighbors/kdtree.hpp"

#include "nbrenc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace nbrenc::neighbors {

namespace {

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

struct Candidate {
  double sq = 0.0;
  std::size_t index = 0;
  bool operator<(const Candidate& o) const { return sq < o.sq || (sq == o.sq && index < o.index); }
};

// Max-heap of the k best candidates seen so far.
class BestK {
 public:
  explicit BestK(std::size_t k) : k_(k) {}
  bool full() const { return heap_.size() == k_; }
  const Candidate& worst() const { return heap_.top(); }
  void offer(Candidate c) {
    if (heap_.size() < k_) {
      heap_.push(c);
    } else if (c < heap_.top()) {
      heap_.pop();
      heap_.push(c);
    }
  }
  std::vector<Neighbor> finish() {
    std::vector<Neighbor> out(heap_.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = Neighbor{heap_.top().index, std::sqrt(heap_.top().sq)};
      heap_.pop();
    }
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<Candidate> heap_;
};

void check_k(std::size_t n, std::size_t k, bool exclude_self) {
  const std::size_t available = exclude_self ? n - 1 : n;
  if (k == 0 || k > available) {
    throw InputError("k=" + std::to_string(k) + " out of range: " + std::to_string(available) +
                     " candidate points");
  }
}

}  // namespace

// Four 16-wide float accumulators (64 lanes) followed by a fixed-order
// reduction in double. GCC vector types keep the lanes in registers and make
// the result independent of pointer alignment.
using Float16 = float __attribute__((vector_size(64)));

namespace {

inline Float16 load16(const float* p) {
  Float16 f;
  std::memcpy(&f, p, sizeof f);
  return f;
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) {
  const std::size_t d = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  Float16 acc0 = {}, acc1 = {}, acc2 = {}, acc3 = {};
  std::size_t j = 0;
  for (; j + 64 <= d; j += 64) {
    const Float16 d0 = load16(pa + j) - load16(pb + j);
    const Float16 d1 = load16(pa + j + 16) - load16(pb + j + 16);
    const Float16 d2 = load16(pa + j + 32) - load16(pb + j + 32);
    const Float16 d3 = load16(pa + j + 48) - load16(pb + j + 48);
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  for (; j + 16 <= d; j += 16) {
    const Float16 d0 = load16(pa + j) - load16(pb + j);
    acc0 += d0 * d0;
  }
  double tail = 0.0;
  for (; j < d; ++j) {
    const double diff = static_cast<double>(pa[j]) - static_cast<double>(pb[j]);
    tail += diff * diff;
  }
  const Float16 sum = (acc0 + acc1) + (acc2 + acc3);
  double lanes[16];
  for (int l = 0; l < 16; ++l) lanes[l] = static_cast<double>(sum[l]);
  for (int width = 8; width >= 1; width /= 2) {
    for (int l = 0; l < width; ++l) lanes[l] += lanes[l + width];
  }
  return lanes[0] + tail;
}

KdTree::KdTree(DenseMatrix points, std::size_t leaf_capacity)
    : points_(std::move(points)), leaf_capacity_(std::max<std::size_t>(1, leaf_capacity)) {
  if (points_.rows() == 0 || points_.cols() == 0) {
    throw InputError("cannot build a k-d tree over an empty matrix");
  }
  ids_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(ids_.begin(), ids_.end(), std::size_t{0});
  nodes_.reserve(2 * ids_.size() / leaf_capacity_ + 1);
  build(0, ids_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back(Node{});
  Node node;
  node.begin = begin;
  node.end = end;

  if (end - begin > leaf_capacity_) {
    std::size_t best_dim = 0;
    float best_spread = 0.0f;
    for (Eigen::Index dim = 0; dim < points_.cols(); ++dim) {
      float lo = std::numeric_limits<float>::infinity();
      float hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const float v = points_(static_cast<Eigen::Index>(ids_[i]), dim);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = static_cast<std::size_t>(dim);
      }
    }
    if (best_spread > 0.0f) {
      const auto dim = static_cast<Eigen::Index>(best_dim);
      const std::size_t mid = begin + (end - begin) / 2;
      auto by_coord = [&](std::size_t a, std::size_t b) {
        const float va = points_(static_cast<Eigen::Index>(a), dim);
        const float vb = points_(static_cast<Eigen::Index>(b), dim);
        return va < vb || (va == vb && a < b);
      };
      std::nth_element(ids_.begin() + static_cast<std::ptrdiff_t>(begin),
                       ids_.begin() + static_cast<std::ptrdiff_t>(mid),
                       ids_.begin() + static_cast<std::ptrdiff_t>(end), by_coord);
      node.leaf = false;
      node.split_dim = best_dim;
      node.split_value = points_(static_cast<Eigen::Index>(ids_[mid]), dim);
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

std::vector<Neighbor> KdTree::search(std::span<const float> point, std::size_t k,
                                     std::size_t skip) const {
  BestK best(k);
  // Explicit stack of (node, lower bound on squared distance).
  std::vector<std::pair<std::size_t, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (best.full() && bound > best.worst().sq) continue;
    const Node& node = nodes_[id];
    if (node.leaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t pid = ids_[i];
        if (pid == skip) continue;
        best.offer(Candidate{squared_distance(point, row_span(points_, static_cast<Eigen::Index>(pid))), pid});
      }
      continue;
    }
    const double diff = static_cast<double>(point[node.split_dim]) - static_cast<double>(node.split_value);
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    // Far side first on the stack so the near side is explored first.
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  return best.finish();
}

std::vector<Neighbor> KdTree::query(std::size_t row, std::size_t k, bool exclude_self) const {
  if (row >= size()) throw InputError("query row " + std::to_string(row) + " out of range");
  check_k(size(), k, exclude_self);
  return search(row_span(points_, static_cast<Eigen::Index>(row)), k, exclude_self ? row : kNoSkip);
}

std::vector<Neighbor> KdTree::query(std::span<const float> point, std::size_t k) const {
  if (point.size() != dims()) throw DimensionError("query point has wrong dimensionality");
  check_k(size(), k, false);
  return search(point, k, kNoSkip);
}

std::vector<std::vector<std::size_t>> KdTree::leaves() const {
  std::vector<std::vector<std::size_t>> out;
  for (const Node& node : nodes_) {
    if (node.leaf) {
      out.emplace_back(ids_.begin() + static_cast<std::ptrdiff_t>(node.begin),
                       ids_.begin() + static_cast<std::ptrdiff_t>(node.end));
    }
  }
  return out;
}

KdTree build_kdtree(const DenseMatrix& points, std::size_t leaf_capacity) {
  return KdTree(points, leaf_capacity);
}

std::vector<Neighbor> query_knn(const KdTree& index, std::size_t row, std::size_t k,
                                bool exclude_self) {
  return index.query(row, k, exclude_self);
}

std::vector<Neighbor> query_knn(const KdTree& index, std::span<const float> point, std::size_t k) {
  return index.query(point, k);
}

namespace {

std::vector<Neighbor> scan(const DenseMatrix& points, std::span<const float> point, std::size_t k,
                           std::size_t skip) {
  std::vector<Candidate> all;
  all.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const auto id = static_cast<std::size_t>(r);
    if (id == skip) continue;
    all.push_back(Candidate{squared_distance(point, row_span(points, r)), id});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<Neighbor> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = Neighbor{all[i].index, std::sqrt(all[i].sq)};
  return out;
}

}  // namespace

std::vector<Neighbor> brute_force_knn(const DenseMatrix& points, std::size_t row, std::size_t k,
                                      bool exclude_self) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw InputError("empty point set");
  if (row >= n) throw InputError("query row " + std::to_string(row) + " out of range");
  check_k(n, k, exclude_self);
  return scan(points, row_span(points, static_cast<Eigen::Index>(row)), k, exclude_self ? row : kNoSkip);
}

std::vector<Neighbor> brute_force_knn(const DenseMatrix& points, std::span<const float> point,
                                      std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw InputError("empty point set");
  if (point.size() != static_cast<std::size_t>(points.cols())) {
    throw DimensionError("query point has wrong dimensionality");
  }
  check_k(n, k, false);
  return scan(points, point, k, kNoSkip);
}

std::vector<std::vector<Neighbor>> all_knn(const DenseMatrix& points, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw InputError("empty point set");
  check_k(n, k, true);
  std::vector<std::vector<Neighbor>> out(n);
  if (static_cast<std::size_t>(points.cols()) <= kAllKnnTreeMaxDims) {
    const KdTree tree(points);
    for (std::size_t i = 0; i < n; ++i) out[i] = tree.query(i, k, true);
    return out;
  }
  constexpr std::size_t kQueryTile = 64;
  constexpr std::size_t kPointTile = 128;
  std::vector<BestK> best;
  for (std::size_t q0 = 0; q0 < n; q0 += kQueryTile) {
    const std::size_t q1 = std::min(n, q0 + kQueryTile);
    best.assign(q1 - q0, BestK(k));
    for (std::size_t p0 = 0; p0 < n; p0 += kPointTile) {
      const std::size_t p1 = std::min(n, p0 + kPointTile);
      for (std::size_t q = q0; q < q1; ++q) {
        const auto query = row_span(points, static_cast<Eigen::Index>(q));
        BestK& b = best[q - q0];
        for (std::size_t p = p0; p < p1; ++p) {
          if (p == q) continue;
          b.offer(Candidate{squared_distance(query, row_span(points, static_cast<Eigen::Index>(p))), p});
        }
      }
    }
    for (std::size_t q = q0; q < q1; ++q) out[q] = best[q - q0].finish();
  }
  return out;
}

}  // namespace nbrenc::neighbors
