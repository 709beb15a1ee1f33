#pragma once

#include "nbrenc/matrix.hpp"

#include <cstdint>

namespace nbrenc::evaluation {

struct SvmOptions {
  double lambda = 1e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  // z-score features with the training set's statistics before fitting.
  bool standardize = true;
};

// One-vs-rest linear classifier. Each row of `weights` is one class; the last
// column multiplies a constant 1 feature.
struct LinearSvm {
  Matrix<double> weights;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
  Matrix<double> scores(const DenseMatrix& x) const;
  // argmax score, ties to the lowest class id.
  LabelVector predict(const DenseMatrix& x) const;
};

// Pegasos stochastic subgradient descent on hinge loss + lambda/2 ||w||^2
// with step 1/(lambda t) and projection onto the 1/sqrt(lambda) ball. All
// classes share one seeded sample order per epoch.
LinearSvm train_linear_svm(const DenseMatrix& x, const LabelVector& y, const SvmOptions& options);

double error_rate(const LabelVector& pred, const LabelVector& truth);

}  // namespace nbrenc::evaluation
