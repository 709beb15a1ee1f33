#pragma once

#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/autodiff/tape.hpp"
#include "nbrenc/models/model.hpp"

#include <optional>
#include <vector>

namespace nbrenc::models {

// Noise drawn for one optimizer step. `input` is the (possibly corrupted)
// encoder input; `eps` is set for the variational variant only.
template <typename T>
struct ObjectiveNoise {
  Matrix<T> input;
  std::optional<Matrix<T>> eps;
};

// Corruption draws come first (denoising), then the reparameterization noise
// (variational). Other variants consume nothing from `rng`.
template <typename T>
ObjectiveNoise<T> draw_objective_noise(const ModelConfig& config, const Matrix<T>& x, Rng& rng);

struct ObjectiveNodes {
  autodiff::NodeId loss;
  autodiff::NodeId reconstruction;
  std::optional<autodiff::NodeId> kl;
};

// What decoder j reconstructs: `target` row r is paired with batch row
// `source[r]`. A bijective routing gives every decoder all batch rows once;
// greedy routing may give a decoder several copies of a row or none.
template <typename T>
struct DecoderTargets {
  Matrix<T> target;
  std::vector<std::size_t> source;
};

// Identity routing: decoder j reconstructs slot_targets[j] for every row.
template <typename T>
std::vector<DecoderTargets<T>> direct_targets(const std::vector<Matrix<T>>& slot_targets);

// Records the training loss on `tape`. With B batch rows and k decoders the
// reconstruction term is the sum over (row, slot) pairs of the per-pair mean
// loss divided by B*k, i.e. the mean over slots of the per-slot loss. Decoder
// j's share is weighted by its pair count over B*k. The variational variant
// adds kl_weight * KL.
//
// The parameter stores are passed separately so that a single merged store
// (as used by gradient checks) can serve as encoder and every decoder.
template <typename T>
ObjectiveNodes reconstruction_objective(autodiff::Tape<T>& tape, const ModelConfig& config,
                                        const autodiff::ParamStore<T>& encoder,
                                        const std::vector<const autodiff::ParamStore<T>*>& decoders,
                                        const ObjectiveNoise<T>& noise,
                                        const std::vector<DecoderTargets<T>>& targets);

template <typename T>
ObjectiveNodes reconstruction_objective(autodiff::Tape<T>& tape, const Model<T>& model,
                                        const ObjectiveNoise<T>& noise,
                                        const std::vector<DecoderTargets<T>>& targets);

// Draws the noise from `rng` and records the objective.
template <typename T>
ObjectiveNodes reconstruction_objective(autodiff::Tape<T>& tape, const Model<T>& model,
                                        const Matrix<T>& x, const std::vector<DecoderTargets<T>>& targets,
                                        Rng& rng);

// Every encoder and decoder parameter in one store.
template <typename T>
autodiff::ParamStore<T> merged_parameters(const Model<T>& model);

// Permutation slot -> decoder for one sample from its k×k loss matrix
// (rows = slots, columns = decoders). `typed` is the identity, `matched` the
// minimum-cost bijection with lexicographic tie-break, `greedy` the per-slot
// argmin (lowest index on ties), which need not be a bijection.
std::vector<std::size_t> assign_decoders(const Matrix<double>& loss_matrix,
                                         AssignmentStrategy strategy);

// Per-row reconstruction loss, mean over columns, in double.
template <typename T>
std::vector<double> per_row_loss(const Matrix<T>& pred, const Matrix<T>& target, LossKind kind);

// Routes the per-slot targets of a batch to decoders. With one decoder or the
// typed strategy this is `direct_targets`. Otherwise each row's k×k loss
// matrix is evaluated without recording, on the clean input and the
// deterministic latent, and `assign_decoders` picks the routing.
template <typename T>
std::vector<DecoderTargets<T>> route_targets(const Model<T>& model, const Matrix<T>& x,
                                             const std::vector<Matrix<T>>& slot_targets);

}  // namespace nbrenc::models
