#pragma once

#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/autodiff/tape.hpp"
#include "nbrenc/random.hpp"

#include <span>
#include <string>
#include <vector>

namespace nbrenc::autodiff {

struct LayerSpec {
  std::size_t width = 0;
  Activation activation = Activation::identity;
};

// Parameter names for layer `l` of the stack called `prefix`.
std::string weight_name(const std::string& prefix, std::size_t layer);
std::string bias_name(const std::string& prefix, std::size_t layer);

// Adds Glorot-uniform weights and zero biases for a stack mapping
// `input_width` through `layers`.
template <typename T>
void init_mlp(ParamStore<T>& params, const std::string& prefix, std::size_t input_width,
              std::span<const LayerSpec> layers, Rng& rng);

// Records affine + activation for every layer. Throws DimensionError naming
// the layer whose weight does not fit its input.
template <typename T>
NodeId mlp_forward(Tape<T>& tape, const ParamStore<T>& params, const std::string& prefix, NodeId x,
                   std::span<const LayerSpec> layers);

// Same computation without recording.
template <typename T>
Matrix<T> mlp_eval(const ParamStore<T>& params, const std::string& prefix, const Matrix<T>& x,
                   std::span<const LayerSpec> layers);

}  // namespace nbrenc::autodiff
