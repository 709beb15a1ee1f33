#pragma once

#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/autodiff/tape.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace nbrenc::autodiff {

// Builds a scalar loss on a fresh tape from the given parameters. Must be a
// pure function of the parameters (fixed noise, fixed targets).
using LossBuilder = std::function<NodeId(Tape<double>&, const ParamStore<double>&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Entries sampled per parameter; 0 checks every entry.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_entry = -1;
  std::size_t entries_checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, 1e-12) between the tape gradient and
// a central difference, maximised over the sampled entries.
GradCheckResult finite_difference_check(const LossBuilder& loss, const ParamStore<double>& params,
                                        const GradCheckOptions& options = {});

// Same comparison against caller-supplied analytic gradients.
GradCheckResult compare_with_finite_differences(const LossBuilder& loss,
                                                const ParamStore<double>& params,
                                                const Gradients<double>& analytic,
                                                const GradCheckOptions& options = {});

}  // namespace nbrenc::autodiff
