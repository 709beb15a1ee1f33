#pragma once

#include "nbrenc/matrix.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace nbrenc::autodiff {

template <typename T>
class ParamStore;

// Gradient per parameter name.
template <typename T>
using Gradients = std::map<std::string, Matrix<T>>;

struct NodeId {
  std::size_t index = 0;
  bool operator==(const NodeId&) const = default;
};

enum class OpKind {
  constant,
  parameter,
  matmul,
  add_bias,
  add,
  scale,
  mul,
  sum,
  relu,
  sigmoid,
  tanh,
  slice_cols,
  gather_rows,
  clamp,
  reparameterize,
  bce,
  mse,
  kl,
};

enum class Activation { identity, relu, sigmoid, tanh };

// Lower bound / upper bound applied to predictions inside the cross entropy.
inline constexpr double kBceEpsilon = 1e-7;

// Reverse-mode record of a computation over dense matrices.
//
// Nodes are appended in evaluation order, so parents always precede children
// and backward() is a single reverse sweep. Values are computed eagerly when
// a node is added. Nodes that do not depend on any parameter are never given
// a gradient.
template <typename T>
class Tape {
 public:
  NodeId constant(Matrix<T> value);
  // Parameter leaf; the same name may appear more than once, gradients add up.
  NodeId parameter(const std::string& name, const Matrix<T>& value);

  NodeId matmul(NodeId a, NodeId b);
  // x (n×c) plus a 1×c row broadcast over every row.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId a, T factor);
  NodeId mul(NodeId a, NodeId b);
  NodeId sum(NodeId a);
  NodeId activation(NodeId x, Activation act);
  NodeId slice_cols(NodeId x, Eigen::Index begin, Eigen::Index count);
  NodeId gather_rows(NodeId x, std::vector<std::size_t> rows);
  NodeId clamp(NodeId x, T lo, T hi);
  // mu + exp(log_var / 2) * noise, noise held constant.
  NodeId reparameterize(NodeId mu, NodeId log_var, Matrix<T> noise);

  // Scalar losses (1×1 nodes), mean reduction over all elements.
  NodeId bce_loss(NodeId pred, Matrix<T> target);
  NodeId mse_loss(NodeId pred, Matrix<T> target);
  // KL(N(mu, exp(log_var)) || N(0, I)), summed over columns, mean over rows.
  NodeId kl_divergence(NodeId mu, NodeId log_var);

  const Matrix<T>& value(NodeId id) const { return nodes_.at(id.index).value; }
  T scalar(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_.at(id.index).op; }
  const std::vector<NodeId>& parents(NodeId id) const { return nodes_.at(id.index).parents; }
  std::size_t size() const { return nodes_.size(); }

  // d loss / d parameter for every parameter leaf on the tape. When `store`
  // is given, parameters of the store that the tape never saw get zeros.
  Gradients<T> backward(NodeId loss, const ParamStore<T>* store = nullptr) const;

 private:
  struct Node {
    OpKind op = OpKind::constant;
    std::vector<NodeId> parents;
    Matrix<T> value;
    Matrix<T> aux;  // target, noise or cached local partial depending on op
    std::vector<std::size_t> rows;
    std::string name;
    T a = T(0);
    T b = T(0);
    bool needs_grad = false;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  bool any_needs_grad(std::initializer_list<NodeId> ids) const;

  std::vector<Node> nodes_;
};

// Plain (tape-free) loss values; the tape ops compute exactly these.
template <typename T>
T bce_loss(const Matrix<T>& pred, const Matrix<T>& target);
template <typename T>
T mse_loss(const Matrix<T>& pred, const Matrix<T>& target);
template <typename T>
T kl_divergence(const Matrix<T>& mu, const Matrix<T>& log_var);

template <typename T>
Matrix<T> apply_activation(const Matrix<T>& x, Activation act);

}  // namespace nbrenc::autodiff
