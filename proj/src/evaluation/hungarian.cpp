#include "nbrenc/evaluation/hungarian.hpp"

#include "nbrenc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nbrenc::evaluation {

namespace {

void check_square(const Matrix<double>& cost) {
  if (cost.rows() != cost.cols()) {
    throw InputError("assignment needs a square cost matrix, got " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()));
  }
  if (!cost.allFinite()) throw InputError("assignment cost matrix has non-finite entries");
}

// Shortest augmenting path with row/column potentials, O(n^3).
std::vector<std::size_t> solve(const Matrix<double>& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return perm;
}

}  // namespace

double assignment_cost(const Matrix<double>& cost, const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
  }
  return total;
}

double hungarian_min_cost(const Matrix<double>& cost) {
  check_square(cost);
  if (cost.rows() == 0) return 0.0;
  return assignment_cost(cost, solve(cost));
}

std::vector<std::size_t> hungarian(const Matrix<double>& cost) {
  check_square(cost);
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n <= 1) return std::vector<std::size_t>(n, 0);

  // Fix rows in order, each to the lowest column that still admits an
  // optimal completion of the remaining rows.
  std::vector<std::size_t> rows_left(n), cols_left(n);
  for (std::size_t i = 0; i < n; ++i) rows_left[i] = cols_left[i] = i;
  double remaining = hungarian_min_cost(cost);
  const double tol = 1e-9 * std::max(1.0, cost.cwiseAbs().maxCoeff() * static_cast<double>(n));

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows_left.erase(rows_left.begin());
    bool placed = false;
    for (std::size_t c = 0; c < cols_left.size() && !placed; ++c) {
      const std::size_t col = cols_left[c];
      const double fixed = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col));
      double rest = 0.0;
      Matrix<double> sub(static_cast<Eigen::Index>(rows_left.size()), static_cast<Eigen::Index>(rows_left.size()));
      if (!rows_left.empty()) {
        for (std::size_t r = 0; r < rows_left.size(); ++r) {
          std::size_t cc = 0;
          for (std::size_t k = 0; k < cols_left.size(); ++k) {
            if (k == c) continue;
            sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc++)) =
                cost(static_cast<Eigen::Index>(rows_left[r]), static_cast<Eigen::Index>(cols_left[k]));
          }
        }
        rest = assignment_cost(sub, solve(sub));
      }
      if (fixed + rest <= remaining + tol || c + 1 == cols_left.size()) {
        perm[i] = col;
        remaining = rest;
        cols_left.erase(cols_left.begin() + static_cast<std::ptrdiff_t>(c));
        placed = true;
      }
    }
  }
  return perm;
}

}  // namespace nbrenc::evaluation
