#include "nbrenc/evaluation/svm.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nbrenc::evaluation {

namespace {

Eigen::RowVectorXd augmented(const LinearSvm& svm, const DenseMatrix& x, Eigen::Index r) {
  const Eigen::Index d = x.cols();
  Eigen::RowVectorXd v(d + 1);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = (static_cast<double>(x(r, j)) - svm.mean[j]) * svm.scale[j];
  v[d] = 1.0;
  return v;
}

}  // namespace

Matrix<double> LinearSvm::scores(const DenseMatrix& x) const {
  if (x.cols() + 1 != weights.cols()) throw DimensionError("classifier expects " + std::to_string(weights.cols() - 1) + " features");
  Matrix<double> out(x.rows(), weights.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.row(r) = weights * augmented(*this, x, r).transpose();
  }
  return out;
}

LabelVector LinearSvm::predict(const DenseMatrix& x) const {
  const Matrix<double> s = scores(x);
  LabelVector out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < s.cols(); ++c) {
      if (s(r, c) > s(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

LinearSvm train_linear_svm(const DenseMatrix& x, const LabelVector& y, const SvmOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw InputError("feature/label count mismatch");
  if (y.empty()) throw InputError("no training examples");
  if (!(options.lambda > 0.0)) throw InputError("SVM lambda must be positive");
  const int classes = *std::max_element(y.begin(), y.end()) + 1;
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (int v : y) {
    if (v < 0) throw InputError("negative label");
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c = 0; c < classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) throw InputError("class " + std::to_string(c) + " has no examples");
  }

  const Eigen::Index d = x.cols();
  LinearSvm svm;
  svm.mean = Eigen::RowVectorXd::Zero(d);
  svm.scale = Eigen::RowVectorXd::Ones(d);
  if (options.standardize) {
    const Matrix<double> xd = x.cast<double>();
    svm.mean = xd.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var = (xd.col(j).array() - svm.mean[j]).square().mean();
      svm.scale[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
  }
  Matrix<double> xa(x.rows(), d + 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) xa.row(r) = augmented(svm, x, r);

  svm.weights = Matrix<double>::Zero(classes, d + 1);
  const double lambda = options.lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  Rng rng(options.seed);
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    fisher_yates(order, rng);
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto row = xa.row(static_cast<Eigen::Index>(idx));
      for (int c = 0; c < classes; ++c) {
        auto w = svm.weights.row(c);
        const double target = y[idx] == c ? 1.0 : -1.0;
        const double margin = target * w.dot(row);
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) w += (eta * target) * row;
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
      }
    }
  }
  return svm;
}

double error_rate(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) throw InputError("prediction/label count mismatch");
  if (pred.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

}  // namespace nbrenc::evaluation
