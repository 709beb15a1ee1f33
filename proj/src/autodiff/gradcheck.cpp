#include "nbrenc/autodiff/gradcheck.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace nbrenc::autodiff {

namespace {

double evaluate(const LossBuilder& loss, const ParamStore<double>& params) {
  Tape<double> tape;
  return tape.scalar(loss(tape, params));
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& loss, const ParamStore<double>& params,
                                        const GradCheckOptions& options) {
  Tape<double> tape;
  const NodeId root = loss(tape, params);
  return compare_with_finite_differences(loss, params, tape.backward(root, &params), options);
}

GradCheckResult compare_with_finite_differences(const LossBuilder& loss,
                                                const ParamStore<double>& params,
                                                const Gradients<double>& analytic,
                                                const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InputError("finite difference step must be positive");
  Rng rng(options.seed);
  ParamStore<double> probe = params.cast<double>();
  GradCheckResult result;
  for (const auto& name : params.names()) {
    auto grad_it = analytic.find(name);
    if (grad_it == analytic.end()) throw ContractError("no analytic gradient for '" + name + "'");
    Matrix<double>& p = probe.at(name);
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (options.max_entries_per_param != 0 && entries.size() > options.max_entries_per_param) {
      fisher_yates(entries, rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (Eigen::Index e : entries) {
      const double saved = p.data()[e];
      p.data()[e] = saved + options.step;
      const double up = evaluate(loss, probe);
      p.data()[e] = saved - options.step;
      const double down = evaluate(loss, probe);
      p.data()[e] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = grad_it->second.data()[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error || result.worst_entry < 0) {
        result.max_relative_error = std::max(result.max_relative_error, rel);
        if (rel >= result.max_relative_error) {
          result.worst_parameter = name;
          result.worst_entry = e;
        }
      }
    }
  }
  return result;
}

}  // namespace nbrenc::autodiff
