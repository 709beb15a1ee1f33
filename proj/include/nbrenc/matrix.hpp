#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace nbrenc {

// Row-major dense matrix. Training runs in float, gradient checks in double.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using DenseMatrix = Matrix<float>;

// Class or cluster ids, 0..C-1.
using LabelVector = std::vector<int>;

template <typename T>
std::span<const T> row_span(const Matrix<T>& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return m.allFinite();
}

// Copies the listed rows of `m`, in order.
template <typename T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const std::size_t> rows) {
  Matrix<T> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace nbrenc
