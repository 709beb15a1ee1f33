#include "nbrenc/evaluation/metrics.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/evaluation/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace nbrenc::evaluation {

namespace {

void check_pair(const LabelVector& a, const LabelVector& b) {
  if (a.size() != b.size()) {
    throw InputError("label vectors differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  for (int v : a) {
    if (v < 0) throw InputError("negative label");
  }
  for (int v : b) {
    if (v < 0) throw InputError("negative label");
  }
}

int label_count(const LabelVector& v) {
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end()) + 1;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

Matrix<double> contingency_table(const LabelVector& a, const LabelVector& b) {
  check_pair(a, b);
  Matrix<double> t = Matrix<double>::Zero(label_count(a), label_count(b));
  for (std::size_t i = 0; i < a.size(); ++i) t(a[i], b[i]) += 1.0;
  return t;
}

double adjusted_rand_index(const LabelVector& a, const LabelVector& b) {
  const Matrix<double> t = contingency_table(a, b);
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  double index = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) index += choose2(t.data()[i]);
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) sum_a += choose2(t.row(i).sum());
  for (Eigen::Index j = 0; j < t.cols(); ++j) sum_b += choose2(t.col(j).sum());
  const double expected = sum_a * sum_b / choose2(n);
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double normalized_mutual_information(const LabelVector& a, const LabelVector& b) {
  const Matrix<double> t = contingency_table(a, b);
  if (a.empty()) return 1.0;
  const auto n = static_cast<double>(a.size());
  auto entropy = [n](const Eigen::VectorXd& counts) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
      if (counts[i] > 0) h -= (counts[i] / n) * std::log(counts[i] / n);
    }
    return h;
  };
  const Eigen::VectorXd ra = t.rowwise().sum();
  const Eigen::VectorXd cb = t.colwise().sum().transpose();
  const double ha = entropy(ra);
  const double hb = entropy(cb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      const double nij = t(i, j);
      if (nij > 0) mi += (nij / n) * std::log(n * nij / (ra[i] * cb[j]));
    }
  }
  const double nmi = mi / std::sqrt(ha * hb);
  return std::clamp(nmi, 0.0, 1.0);
}

double clustering_accuracy(const LabelVector& pred, const LabelVector& truth) {
  const Matrix<double> t = contingency_table(pred, truth);
  if (pred.empty()) return 1.0;
  const Eigen::Index k = std::max(t.rows(), t.cols());
  Matrix<double> cost = Matrix<double>::Zero(k, k);
  cost.topLeftCorner(t.rows(), t.cols()) = -t;
  const auto perm = hungarian(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    matched -= cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
  }
  return matched / static_cast<double>(pred.size());
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << kMetricsHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    out << r.experiment << ',' << r.seed << ',';
    if (r.size) out << *r.size;
    out << ',' << r.metric << ',' << buf << '\n';
  }
}

}  // namespace nbrenc::evaluation
