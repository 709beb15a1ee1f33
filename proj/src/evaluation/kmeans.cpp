#include "nbrenc/evaluation/kmeans.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/random.hpp"

#include <limits>

namespace nbrenc::evaluation {

namespace {

double sq_dist(const DenseMatrix& points, Eigen::Index r, const Matrix<double>& centroids, Eigen::Index c) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double diff = static_cast<double>(points(r, j)) - centroids(c, j);
    acc += diff * diff;
  }
  return acc;
}

Matrix<double> plus_plus_init(const DenseMatrix& points, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Matrix<double> centroids(static_cast<Eigen::Index>(k), points.cols());
  std::vector<char> chosen(n, 0);
  std::size_t first = uniform_index(rng, n);
  chosen[first] = 1;
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first)).cast<double>();
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points, static_cast<Eigen::Index>(i), centroids, 0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double run = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        run += d2[i];
        if (d2[i] > 0.0 && run > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (!chosen[i] && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a center.
      std::size_t skip = uniform_index(rng, n - c);
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (skip-- == 0) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = 1;
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick)).cast<double>();
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points, static_cast<Eigen::Index>(i), centroids, static_cast<Eigen::Index>(c)));
    }
  }
  return centroids;
}

KMeansResult lloyd(const DenseMatrix& points, Matrix<double> centroids, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(centroids.rows());
  KMeansResult res;
  res.labels.assign(n, -1);
  std::vector<double> cost(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(points, static_cast<Eigen::Index>(i), centroids, static_cast<Eigen::Index>(c));
        if (d < best) {
          best = d;
          best_c = static_cast<int>(c);
        }
      }
      cost[i] = best;
      if (res.labels[i] != best_c) changed = true;
      res.labels[i] = best_c;
      ++sizes[static_cast<std::size_t>(best_c)];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t largest = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (sizes[j] > sizes[largest]) largest = j;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.labels[i] == static_cast<int>(largest) && (far == n || cost[i] > cost[far])) far = i;
      }
      res.labels[far] = static_cast<int>(c);
      cost[far] = 0.0;
      --sizes[largest];
      sizes[c] = 1;
      centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far)).cast<double>();
      changed = true;
    }
    if (!changed && iter > 0) break;
    Matrix<double> sums = Matrix<double>::Zero(centroids.rows(), centroids.cols());
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(res.labels[i]) += points.row(static_cast<Eigen::Index>(i)).cast<double>();
    }
    for (std::size_t c = 0; c < k; ++c) {
      centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(sizes[c]);
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inertia += sq_dist(points, static_cast<Eigen::Index>(i), centroids, res.labels[i]);
    }
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;
  }
  res.centroids = std::move(centroids);
  res.inertia = res.inertia_history.empty() ? 0.0 : res.inertia_history.back();
  return res;
}

}  // namespace

KMeansResult kmeans(const DenseMatrix& points, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (options.clusters < 1) throw InputError("k-means needs k >= 1");
  if (options.clusters > n) {
    throw InputError("k-means: k=" + std::to_string(options.clusters) + " exceeds " + std::to_string(n) + " points");
  }
  if (!points.allFinite()) throw InputError("k-means input has non-finite values");
  Rng rng(options.seed);
  KMeansResult best;
  bool have = false;
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    KMeansResult run = lloyd(points, plus_plus_init(points, options.clusters, rng),
                             std::max<std::size_t>(1, options.max_iter));
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

LabelVector kmeans(const DenseMatrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  return kmeans(points, KMeansOptions{k, seed, max_iter, 10}).labels;
}

}  // namespace nbrenc::evaluation
