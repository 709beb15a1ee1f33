#include "nbrenc/autodiff/param_store.hpp"

#include "nbrenc/errors.hpp"

#include <cmath>

namespace nbrenc::autodiff {

template <typename T>
void ParamStore<T>::add(const std::string& name, Matrix<T> value) {
  if (params_.count(name) != 0) throw ContractError("duplicate parameter '" + name + "'");
  AdamState<T> state;
  state.first_moment = Matrix<T>::Zero(value.rows(), value.cols());
  state.second_moment = Matrix<T>::Zero(value.rows(), value.cols());
  state_.emplace(name, std::move(state));
  params_.emplace(name, std::move(value));
}

template <typename T>
Matrix<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Matrix<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const AdamState<T>& ParamStore<T>::adam_state(const std::string& name) const {
  auto it = state_.find(name);
  if (it == state_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
AdamState<T>& ParamStore<T>::adam_state(const std::string& name) {
  auto it = state_.find(name);
  if (it == state_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::vector<std::string> ParamStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& entry : params_) out.push_back(entry.first);
  return out;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& entry : params_) total += static_cast<std::size_t>(entry.second.size());
  return total;
}

template <typename T>
bool ParamStore<T>::operator==(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.rows() != b->second.rows() || a->second.cols() != b->second.cols()) return false;
    if (a->second != b->second) return false;
  }
  return true;
}

template <typename T>
void adam_step(ParamStore<T>& params, const Gradients<T>& grads, const AdamHyper& hyper) {
  // Validate everything first so a bad gradient leaves the store untouched.
  for (const auto& [name, grad] : grads) {
    const Matrix<T>& p = params.at(name);
    if (grad.rows() != p.rows() || grad.cols() != p.cols()) {
      throw DimensionError("gradient shape mismatch for parameter '" + name + "'");
    }
    if (!grad.allFinite()) throw TrainingError("non-finite gradient for parameter '" + name + "'");
  }
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  for (const auto& [name, grad] : grads) {
    Matrix<T>& p = params.at(name);
    AdamState<T>& st = params.adam_state(name);
    st.step += 1;
    st.first_moment = b1 * st.first_moment + (T(1) - b1) * grad;
    st.second_moment = b2 * st.second_moment + (T(1) - b2) * grad.cwiseProduct(grad);
    const T c1 = static_cast<T>(1.0 - std::pow(hyper.beta1, static_cast<double>(st.step)));
    const T c2 = static_cast<T>(1.0 - std::pow(hyper.beta2, static_cast<double>(st.step)));
    const T lr = static_cast<T>(hyper.lr);
    const T eps = static_cast<T>(hyper.eps);
    p.array() -= lr * (st.first_moment.array() / c1) /
                 ((st.second_moment.array() / c2).sqrt() + eps);
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step<float>(ParamStore<float>&, const Gradients<float>&, const AdamHyper&);
template void adam_step<double>(ParamStore<double>&, const Gradients<double>&, const AdamHyper&);

}  // namespace nbrenc::autodiff
