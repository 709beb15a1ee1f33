#include "nbrenc/autodiff/mlp.hpp"

#include "nbrenc/errors.hpp"

#include <cmath>

namespace nbrenc::autodiff {

std::string weight_name(const std::string& prefix, std::size_t layer) {
  return prefix + "." + std::to_string(layer) + ".W";
}

std::string bias_name(const std::string& prefix, std::size_t layer) {
  return prefix + "." + std::to_string(layer) + ".b";
}

namespace {

template <typename T>
void check_layer(const Matrix<T>& w, const Matrix<T>& b, Eigen::Index input_cols,
                 const LayerSpec& spec, const std::string& prefix, std::size_t layer) {
  if (w.rows() != input_cols || w.cols() != static_cast<Eigen::Index>(spec.width) ||
      b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("layer " + prefix + "." + std::to_string(layer) + ": input has " +
                         std::to_string(input_cols) + " columns, weight is " +
                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         ", declared width " + std::to_string(spec.width));
  }
}

// Each output row is accumulated over the input columns in a fixed order, so
// a row's result does not depend on how many other rows share the batch
// (Eigen picks different kernels for one row and for many).
template <typename T>
Matrix<T> row_independent_product(const Matrix<T>& x, const Matrix<T>& w) {
  Matrix<T> out = Matrix<T>::Zero(x.rows(), w.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto o = out.row(r);
    for (Eigen::Index k = 0; k < x.cols(); ++k) o += x(r, k) * w.row(k);
  }
  return out;
}

}  // namespace

template <typename T>
void init_mlp(ParamStore<T>& params, const std::string& prefix, std::size_t input_width,
              std::span<const LayerSpec> layers, Rng& rng) {
  std::size_t fan_in = input_width;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t fan_out = layers[l].width;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix<T> w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<T>(uniform(rng, -limit, limit));
    }
    params.add(weight_name(prefix, l), std::move(w));
    params.add(bias_name(prefix, l), Matrix<T>::Zero(1, static_cast<Eigen::Index>(fan_out)));
    fan_in = fan_out;
  }
}

template <typename T>
NodeId mlp_forward(Tape<T>& tape, const ParamStore<T>& params, const std::string& prefix, NodeId x,
                   std::span<const LayerSpec> layers) {
  NodeId h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix<T>& w = params.at(weight_name(prefix, l));
    const Matrix<T>& b = params.at(bias_name(prefix, l));
    check_layer(w, b, tape.value(h).cols(), layers[l], prefix, l);
    NodeId wn = tape.parameter(weight_name(prefix, l), w);
    NodeId bn = tape.parameter(bias_name(prefix, l), b);
    h = tape.activation(tape.add_bias(tape.matmul(h, wn), bn), layers[l].activation);
  }
  return h;
}

template <typename T>
Matrix<T> mlp_eval(const ParamStore<T>& params, const std::string& prefix, const Matrix<T>& x,
                   std::span<const LayerSpec> layers) {
  Matrix<T> h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix<T>& w = params.at(weight_name(prefix, l));
    const Matrix<T>& b = params.at(bias_name(prefix, l));
    check_layer(w, b, h.cols(), layers[l], prefix, l);
    Matrix<T> next = row_independent_product(h, w);
    next.rowwise() += b.row(0);
    h = apply_activation(next, layers[l].activation);
  }
  return h;
}

template void init_mlp<float>(ParamStore<float>&, const std::string&, std::size_t,
                              std::span<const LayerSpec>, Rng&);
template void init_mlp<double>(ParamStore<double>&, const std::string&, std::size_t,
                               std::span<const LayerSpec>, Rng&);
template NodeId mlp_forward<float>(Tape<float>&, const ParamStore<float>&, const std::string&, NodeId,
                                   std::span<const LayerSpec>);
template NodeId mlp_forward<double>(Tape<double>&, const ParamStore<double>&, const std::string&,
                                    NodeId, std::span<const LayerSpec>);
template Matrix<float> mlp_eval<float>(const ParamStore<float>&, const std::string&,
                                       const Matrix<float>&, std::span<const LayerSpec>);
template Matrix<double> mlp_eval<double>(const ParamStore<double>&, const std::string&,
                                         const Matrix<double>&, std::span<const LayerSpec>);

}  // namespace nbrenc::autodiff
