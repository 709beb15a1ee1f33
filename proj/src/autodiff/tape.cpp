#include "nbrenc/autodiff/tape.hpp"

#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/errors.hpp"

#include <cmath>
#include <string>

namespace nbrenc::autodiff {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.rows(), a.cols()) +
                         " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename T>
Matrix<T> clamp_bce(const Matrix<T>& pred) {
  const T eps = static_cast<T>(kBceEpsilon);
  return pred.cwiseMax(eps).cwiseMin(T(1) - eps);
}

template <typename T>
Matrix<T> scalar_matrix(T v) {
  Matrix<T> m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

template <typename T>
T bce_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  require_same_shape(pred, target, "bce_loss");
  if (pred.size() == 0) throw DimensionError("bce_loss: empty input");
  const Matrix<T> p = clamp_bce(pred);
  const auto per = -(target.array() * p.array().log() +
                     (T(1) - target.array()) * (T(1) - p.array()).log());
  return per.sum() / static_cast<T>(pred.size());
}

template <typename T>
T mse_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  require_same_shape(pred, target, "mse_loss");
  if (pred.size() == 0) throw DimensionError("mse_loss: empty input");
  return (pred - target).squaredNorm() / static_cast<T>(pred.size());
}

template <typename T>
T kl_divergence(const Matrix<T>& mu, const Matrix<T>& log_var) {
  require_same_shape(mu, log_var, "kl_divergence");
  if (mu.rows() == 0) throw DimensionError("kl_divergence: empty input");
  const auto term = T(1) + log_var.array() - mu.array().square() - log_var.array().exp();
  return T(-0.5) * term.sum() / static_cast<T>(mu.rows());
}

template <typename T>
Matrix<T> apply_activation(const Matrix<T>& x, Activation act) {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return x.cwiseMax(T(0));
    case Activation::sigmoid:
      return (T(1) / (T(1) + (-x.array()).exp())).matrix();
    case Activation::tanh:
      return x.array().tanh().matrix();
  }
  return x;
}

template <typename T>
NodeId Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw ContractError("node id out of range");
  return nodes_[id.index];
}

template <typename T>
bool Tape<T>::any_needs_grad(std::initializer_list<NodeId> ids) const {
  for (NodeId id : ids) {
    if (node(id).needs_grad) return true;
  }
  return false;
}

template <typename T>
T Tape<T>::scalar(NodeId id) const {
  const Matrix<T>& v = node(id).value;
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("node is not scalar");
  return v(0, 0);
}

template <typename T>
NodeId Tape<T>::constant(Matrix<T> value) {
  Node n;
  n.op = OpKind::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::parameter(const std::string& name, const Matrix<T>& value) {
  Node n;
  n.op = OpKind::parameter;
  n.value = value;
  n.name = name;
  n.needs_grad = true;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::matmul(NodeId a, NodeId b) {
  const Matrix<T>& va = node(a).value;
  const Matrix<T>& vb = node(b).value;
  if (va.cols() != vb.rows()) {
    throw DimensionError("matmul: " + shape_str(va.rows(), va.cols()) + " * " +
                         shape_str(vb.rows(), vb.cols()));
  }
  Node n;
  n.op = OpKind::matmul;
  n.parents = {a, b};
  n.value.resize(va.rows(), vb.cols());
  n.value.noalias() = va * vb;
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::add_bias(NodeId x, NodeId bias) {
  const Matrix<T>& vx = node(x).value;
  const Matrix<T>& vb = node(bias).value;
  if (vb.rows() != 1 || vb.cols() != vx.cols()) {
    throw DimensionError("add_bias: input " + shape_str(vx.rows(), vx.cols()) + ", bias " +
                         shape_str(vb.rows(), vb.cols()));
  }
  Node n;
  n.op = OpKind::add_bias;
  n.parents = {x, bias};
  n.value = vx;
  n.value.rowwise() += vb.row(0);
  n.needs_grad = any_needs_grad({x, bias});
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::add(NodeId a, NodeId b) {
  require_same_shape(node(a).value, node(b).value, "add");
  Node n;
  n.op = OpKind::add;
  n.parents = {a, b};
  n.value = node(a).value + node(b).value;
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::scale(NodeId a, T factor) {
  Node n;
  n.op = OpKind::scale;
  n.parents = {a};
  n.value = node(a).value * factor;
  n.a = factor;
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::mul(NodeId a, NodeId b) {
  require_same_shape(node(a).value, node(b).value, "mul");
  Node n;
  n.op = OpKind::mul;
  n.parents = {a, b};
  n.value = node(a).value.cwiseProduct(node(b).value);
  n.needs_grad = any_needs_grad({a, b});
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::sum(NodeId a) {
  Node n;
  n.op = OpKind::sum;
  n.parents = {a};
  n.value = scalar_matrix(node(a).value.sum());
  n.needs_grad = node(a).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::activation(NodeId x, Activation act) {
  if (act == Activation::identity) return x;
  Node n;
  n.parents = {x};
  n.value = apply_activation(node(x).value, act);
  switch (act) {
    case Activation::relu:
      n.op = OpKind::relu;
      break;
    case Activation::sigmoid:
      n.op = OpKind::sigmoid;
      break;
    case Activation::tanh:
      n.op = OpKind::tanh;
      break;
    case Activation::identity:
      break;
  }
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::slice_cols(NodeId x, Eigen::Index begin, Eigen::Index count) {
  const Matrix<T>& vx = node(x).value;
  if (begin < 0 || count < 0 || begin + count > vx.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + std::to_string(vx.cols()));
  }
  Node n;
  n.op = OpKind::slice_cols;
  n.parents = {x};
  n.value = vx.middleCols(begin, count);
  n.rows = {static_cast<std::size_t>(begin)};
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::gather_rows(NodeId x, std::vector<std::size_t> rows) {
  const Matrix<T>& vx = node(x).value;
  for (std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(vx.rows())) throw DimensionError("gather_rows: row out of range");
  }
  Node n;
  n.op = OpKind::gather_rows;
  n.parents = {x};
  n.value = nbrenc::gather_rows(vx, std::span<const std::size_t>(rows));
  n.rows = std::move(rows);
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::clamp(NodeId x, T lo, T hi) {
  Node n;
  n.op = OpKind::clamp;
  n.parents = {x};
  n.value = node(x).value.cwiseMax(lo).cwiseMin(hi);
  n.a = lo;
  n.b = hi;
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::reparameterize(NodeId mu, NodeId log_var, Matrix<T> noise) {
  const Matrix<T>& vm = node(mu).value;
  const Matrix<T>& vl = node(log_var).value;
  require_same_shape(vm, vl, "reparameterize");
  require_same_shape(vm, noise, "reparameterize");
  Node n;
  n.op = OpKind::reparameterize;
  n.parents = {mu, log_var};
  n.value = vm + ((T(0.5) * vl.array()).exp() * noise.array()).matrix();
  n.aux = std::move(noise);
  n.needs_grad = any_needs_grad({mu, log_var});
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::bce_loss(NodeId pred, Matrix<T> target) {
  Node n;
  n.op = OpKind::bce;
  n.parents = {pred};
  n.value = scalar_matrix(nbrenc::autodiff::bce_loss(node(pred).value, target));
  n.aux = std::move(target);
  n.needs_grad = node(pred).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::mse_loss(NodeId pred, Matrix<T> target) {
  Node n;
  n.op = OpKind::mse;
  n.parents = {pred};
  n.value = scalar_matrix(nbrenc::autodiff::mse_loss(node(pred).value, target));
  n.aux = std::move(target);
  n.needs_grad = node(pred).needs_grad;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::kl_divergence(NodeId mu, NodeId log_var) {
  Node n;
  n.op = OpKind::kl;
  n.parents = {mu, log_var};
  n.value = scalar_matrix(nbrenc::autodiff::kl_divergence(node(mu).value, node(log_var).value));
  n.needs_grad = any_needs_grad({mu, log_var});
  return push(std::move(n));
}

template <typename T>
Gradients<T> Tape<T>::backward(NodeId loss, const ParamStore<T>* store) const {
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractError("backward: loss node is " + shape_str(root.value.rows(), root.value.cols()) +
                        ", expected a scalar");
  }
  std::vector<Matrix<T>> grads(loss.index + 1);
  grads[loss.index] = Matrix<T>::Ones(1, 1);

  // Adds `g` into the gradient slot of `id`, skipping constant subtrees.
  auto accumulate = [&](NodeId id, const auto& g) {
    if (!nodes_[id.index].needs_grad) return;
    Matrix<T>& slot = grads[id.index];
    if (slot.size() == 0) {
      slot = g;
    } else {
      slot += g;
    }
  };

  Gradients<T> out;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    const Matrix<T>& g = grads[i];
    if (g.size() == 0 || !n.needs_grad) continue;
    switch (n.op) {
      case OpKind::constant:
        break;
      case OpKind::parameter: {
        auto it = out.find(n.name);
        if (it == out.end()) {
          out.emplace(n.name, g);
        } else {
          it->second += g;
        }
        break;
      }
      case OpKind::matmul: {
        const Node& a = nodes_[n.parents[0].index];
        const Node& b = nodes_[n.parents[1].index];
        if (a.needs_grad) {
          Matrix<T> ga(a.value.rows(), a.value.cols());
          ga.noalias() = g * b.value.transpose();
          accumulate(n.parents[0], ga);
        }
        if (b.needs_grad) {
          Matrix<T> gb(b.value.rows(), b.value.cols());
          gb.noalias() = a.value.transpose() * g;
          accumulate(n.parents[1], gb);
        }
        break;
      }
      case OpKind::add_bias:
        accumulate(n.parents[0], g);
        if (nodes_[n.parents[1].index].needs_grad) {
          Matrix<T> gb = g.colwise().sum();
          accumulate(n.parents[1], gb);
        }
        break;
      case OpKind::add:
        accumulate(n.parents[0], g);
        accumulate(n.parents[1], g);
        break;
      case OpKind::scale:
        accumulate(n.parents[0], Matrix<T>(g * n.a));
        break;
      case OpKind::mul:
        accumulate(n.parents[0], Matrix<T>(g.cwiseProduct(nodes_[n.parents[1].index].value)));
        accumulate(n.parents[1], Matrix<T>(g.cwiseProduct(nodes_[n.parents[0].index].value)));
        break;
      case OpKind::sum: {
        const Matrix<T>& x = nodes_[n.parents[0].index].value;
        accumulate(n.parents[0], Matrix<T>::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case OpKind::relu: {
        const Matrix<T>& x = nodes_[n.parents[0].index].value;
        accumulate(n.parents[0],
                   Matrix<T>((x.array() > T(0)).select(g.array(), T(0)).matrix()));
        break;
      }
      case OpKind::sigmoid:
        accumulate(n.parents[0],
                   Matrix<T>((g.array() * n.value.array() * (T(1) - n.value.array())).matrix()));
        break;
      case OpKind::tanh:
        accumulate(n.parents[0],
                   Matrix<T>((g.array() * (T(1) - n.value.array().square())).matrix()));
        break;
      case OpKind::slice_cols: {
        const Matrix<T>& x = nodes_[n.parents[0].index].value;
        Matrix<T> gx = Matrix<T>::Zero(x.rows(), x.cols());
        gx.middleCols(static_cast<Eigen::Index>(n.rows[0]), g.cols()) = g;
        accumulate(n.parents[0], gx);
        break;
      }
      case OpKind::gather_rows: {
        const Matrix<T>& x = nodes_[n.parents[0].index].value;
        Matrix<T> gx = Matrix<T>::Zero(x.rows(), x.cols());
        for (std::size_t r = 0; r < n.rows.size(); ++r) {
          gx.row(static_cast<Eigen::Index>(n.rows[r])) += g.row(static_cast<Eigen::Index>(r));
        }
        accumulate(n.parents[0], gx);
        break;
      }
      case OpKind::clamp: {
        const Matrix<T>& x = nodes_[n.parents[0].index].value;
        accumulate(n.parents[0],
                   Matrix<T>(((x.array() >= n.a) && (x.array() <= n.b)).select(g.array(), T(0)).matrix()));
        break;
      }
      case OpKind::reparameterize: {
        const Matrix<T>& lv = nodes_[n.parents[1].index].value;
        accumulate(n.parents[0], g);
        if (nodes_[n.parents[1].index].needs_grad) {
          accumulate(n.parents[1],
                     Matrix<T>((g.array() * n.aux.array() * T(0.5) * (T(0.5) * lv.array()).exp()).matrix()));
        }
        break;
      }
      case OpKind::bce: {
        // Straight-through clamp: the formula's derivative evaluated at the
        // clamped prediction, so saturated outputs still receive a signal.
        const Matrix<T>& pred = nodes_[n.parents[0].index].value;
        const Matrix<T> p = clamp_bce(pred);
        const T scale = g(0, 0) / static_cast<T>(pred.size());
        accumulate(n.parents[0],
                   Matrix<T>((scale * (p.array() - n.aux.array()) / (p.array() * (T(1) - p.array()))).matrix()));
        break;
      }
      case OpKind::mse: {
        const Matrix<T>& pred = nodes_[n.parents[0].index].value;
        const T scale = T(2) * g(0, 0) / static_cast<T>(pred.size());
        accumulate(n.parents[0], Matrix<T>(scale * (pred - n.aux)));
        break;
      }
      case OpKind::kl: {
        const Matrix<T>& mu = nodes_[n.parents[0].index].value;
        const Matrix<T>& lv = nodes_[n.parents[1].index].value;
        const T scale = g(0, 0) / static_cast<T>(mu.rows());
        accumulate(n.parents[0], Matrix<T>(scale * mu));
        accumulate(n.parents[1], Matrix<T>((T(0.5) * scale * (lv.array().exp() - T(1))).matrix()));
        break;
      }
    }
  }

  // Parameters that appear on the tape but are not reachable from the loss.
  for (std::size_t i = 0; i <= loss.index; ++i) {
    const Node& n = nodes_[i];
    if (n.op == OpKind::parameter && out.count(n.name) == 0) {
      out.emplace(n.name, Matrix<T>::Zero(n.value.rows(), n.value.cols()));
    }
  }
  if (store != nullptr) {
    for (const auto& [name, value] : store->params()) {
      if (out.count(name) == 0) out.emplace(name, Matrix<T>::Zero(value.rows(), value.cols()));
    }
  }
  return out;
}

template class Tape<float>;
template class Tape<double>;

template float bce_loss<float>(const Matrix<float>&, const Matrix<float>&);
template double bce_loss<double>(const Matrix<double>&, const Matrix<double>&);
template float mse_loss<float>(const Matrix<float>&, const Matrix<float>&);
template double mse_loss<double>(const Matrix<double>&, const Matrix<double>&);
template float kl_divergence<float>(const Matrix<float>&, const Matrix<float>&);
template double kl_divergence<double>(const Matrix<double>&, const Matrix<double>&);
template Matrix<float> apply_activation<float>(const Matrix<float>&, Activation);
template Matrix<double> apply_activation<double>(const Matrix<double>&, Activation);

}  // namespace nbrenc::autodiff
