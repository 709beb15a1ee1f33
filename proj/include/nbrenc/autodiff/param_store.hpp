#pragma once

#include "nbrenc/autodiff/tape.hpp"
#include "nbrenc/matrix.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nbrenc::autodiff {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Matrix<T> first_moment;
  Matrix<T> second_moment;
  std::int64_t step = 0;
};

// Named parameters plus their optimizer state. Iteration order is the
// lexicographic name order, which is also the checkpoint order.
template <typename T>
class ParamStore {
 public:
  void add(const std::string& name, Matrix<T> value);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Matrix<T>& at(const std::string& name);
  const Matrix<T>& at(const std::string& name) const;
  const AdamState<T>& adam_state(const std::string& name) const;
  AdamState<T>& adam_state(const std::string& name);

  const std::map<std::string, Matrix<T>>& params() const { return params_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;

  // Same parameters in another precision; optimizer state is reset.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, value] : params_) out.add(name, value.template cast<U>());
    return out;
  }

  bool operator==(const ParamStore& other) const;

 private:
  std::map<std::string, Matrix<T>> params_;
  std::map<std::string, AdamState<T>> state_;
};

// Bias-corrected Adam update in place. Parameters missing from `grads` are
// left untouched (their step count does not advance).
template <typename T>
void adam_step(ParamStore<T>& params, const Gradients<T>& grads, const AdamHyper& hyper);

}  // namespace nbrenc::autodiff
