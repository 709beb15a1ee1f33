#include "nbrenc/models/objective.hpp"

#include "nbrenc/errors.hpp"
#include "nbrenc/evaluation/hungarian.hpp"

#include <cmath>
#include <numeric>

namespace nbrenc::models {

using autodiff::LayerSpec;
using autodiff::NodeId;
using autodiff::ParamStore;
using autodiff::Tape;

template <typename T>
ObjectiveNoise<T> draw_objective_noise(const ModelConfig& config, const Matrix<T>& x, Rng& rng) {
  ObjectiveNoise<T> noise;
  noise.input = config.variant == Variant::denoising ? corrupt(x, config.corruption_rate, rng) : x;
  if (config.variant == Variant::variational) {
    noise.eps = standard_normal_matrix<T>(x.rows(), static_cast<Eigen::Index>(config.latent_width()), rng);
  }
  return noise;
}

template <typename T>
std::vector<DecoderTargets<T>> direct_targets(const std::vector<Matrix<T>>& slot_targets) {
  std::vector<DecoderTargets<T>> out;
  out.reserve(slot_targets.size());
  for (const auto& t : slot_targets) {
    DecoderTargets<T> d;
    d.target = t;
    d.source.resize(static_cast<std::size_t>(t.rows()));
    std::iota(d.source.begin(), d.source.end(), std::size_t{0});
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

bool is_identity_rows(const std::vector<std::size_t>& source, Eigen::Index rows) {
  if (source.size() != static_cast<std::size_t>(rows)) return false;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] != i) return false;
  }
  return true;
}

}  // namespace

template <typename T>
ObjectiveNodes reconstruction_objective(Tape<T>& tape, const ModelConfig& config,
                                        const ParamStore<T>& encoder,
                                        const std::vector<const ParamStore<T>*>& decoders,
                                        const ObjectiveNoise<T>& noise,
                                        const std::vector<DecoderTargets<T>>& targets) {
  const std::size_t k = config.decoder_count;
  if (decoders.size() != k) {
    throw ContractError("objective: " + std::to_string(decoders.size()) + " decoder stores for " +
                        std::to_string(k) + " decoders");
  }
  if (targets.size() != k) {
    throw ContractError("objective: " + std::to_string(targets.size()) + " target sets for " +
                        std::to_string(k) + " decoders");
  }
  const Eigen::Index batch = noise.input.rows();
  if (batch == 0) throw InputError("objective: empty batch");
  if (static_cast<std::size_t>(noise.input.cols()) != config.input_width()) {
    throw DimensionError("objective: input has " + std::to_string(noise.input.cols()) +
                         " columns, model expects " + std::to_string(config.input_width()));
  }

  const auto enc_layers = config.encoder_layers();
  const auto dec_layers = config.decoder_layers();
  const NodeId x = tape.constant(noise.input);
  const NodeId head = autodiff::mlp_forward(tape, encoder, kEncoderPrefix, x, std::span<const LayerSpec>(enc_layers));

  NodeId z = head;
  std::optional<NodeId> kl;
  if (config.variant == Variant::variational) {
    if (!noise.eps) throw ContractError("objective: variational variant needs reparameterization noise");
    const auto m = static_cast<Eigen::Index>(config.latent_width());
    const NodeId mu = tape.slice_cols(head, 0, m);
    const NodeId lv = tape.clamp(tape.slice_cols(head, m, m), T(kLogVarMin), T(kLogVarMax));
    z = tape.reparameterize(mu, lv, *noise.eps);
    kl = tape.kl_divergence(mu, lv);
  }

  std::size_t total_pairs = 0;
  for (const auto& t : targets) total_pairs += t.source.size();
  if (total_pairs == 0) throw ContractError("objective: no reconstruction targets");

  std::optional<NodeId> recon;
  const double denom = static_cast<double>(batch) * static_cast<double>(k);
  for (std::size_t j = 0; j < k; ++j) {
    const DecoderTargets<T>& t = targets[j];
    if (t.source.empty()) continue;
    if (static_cast<std::size_t>(t.target.rows()) != t.source.size()) {
      throw DimensionError("objective: decoder " + std::to_string(j) + " has " +
                           std::to_string(t.target.rows()) + " target rows for " +
                           std::to_string(t.source.size()) + " sources");
    }
    for (std::size_t s : t.source) {
      if (s >= static_cast<std::size_t>(batch)) throw ContractError("objective: target source row out of range");
    }
    const NodeId zin = is_identity_rows(t.source, batch) ? z : tape.gather_rows(z, t.source);
    const NodeId pred = autodiff::mlp_forward(tape, *decoders[j], decoder_prefix(j), zin,
                                              std::span<const LayerSpec>(dec_layers));
    NodeId term = config.loss == LossKind::bce ? tape.bce_loss(pred, t.target) : tape.mse_loss(pred, t.target);
    const double weight = static_cast<double>(t.source.size()) / denom;
    if (weight != 1.0) term = tape.scale(term, static_cast<T>(weight));
    recon = recon ? tape.add(*recon, term) : term;
  }

  ObjectiveNodes out;
  out.reconstruction = *recon;
  out.kl = kl;
  out.loss = *recon;
  if (kl && config.kl_weight != 0.0) {
    const NodeId penalty = config.kl_weight == 1.0 ? *kl : tape.scale(*kl, static_cast<T>(config.kl_weight));
    out.loss = tape.add(*recon, penalty);
  }
  return out;
}

template <typename T>
ObjectiveNodes reconstruction_objective(Tape<T>& tape, const Model<T>& model, const ObjectiveNoise<T>& noise,
                                        const std::vector<DecoderTargets<T>>& targets) {
  std::vector<const ParamStore<T>*> decoders;
  for (const auto& d : model.decoders) decoders.push_back(&d);
  return reconstruction_objective(tape, model.config, model.encoder, decoders, noise, targets);
}

template <typename T>
ObjectiveNodes reconstruction_objective(Tape<T>& tape, const Model<T>& model, const Matrix<T>& x,
                                        const std::vector<DecoderTargets<T>>& targets, Rng& rng) {
  return reconstruction_objective(tape, model, draw_objective_noise(model.config, x, rng), targets);
}

template <typename T>
ParamStore<T> merged_parameters(const Model<T>& model) {
  ParamStore<T> out;
  for (const auto& [name, value] : model.all_parameters()) out.add(name, *value);
  return out;
}

std::vector<std::size_t> assign_decoders(const Matrix<double>& loss_matrix, AssignmentStrategy strategy) {
  if (loss_matrix.rows() != loss_matrix.cols()) {
    throw ContractError("assign_decoders: loss matrix is " + std::to_string(loss_matrix.rows()) + "x" +
                        std::to_string(loss_matrix.cols()) + ", expected square");
  }
  const auto k = static_cast<std::size_t>(loss_matrix.rows());
  std::vector<std::size_t> perm(k);
  switch (strategy) {
    case AssignmentStrategy::typed:
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      return perm;
    case AssignmentStrategy::greedy:
      for (std::size_t s = 0; s < k; ++s) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
          if (loss_matrix(s, j) < loss_matrix(s, best)) best = j;
        }
        perm[s] = best;
      }
      return perm;
    case AssignmentStrategy::matched:
      return evaluation::hungarian(loss_matrix);
  }
  return perm;
}

template <typename T>
std::vector<double> per_row_loss(const Matrix<T>& pred, const Matrix<T>& target, LossKind kind) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("per_row_loss: prediction and target shapes differ");
  }
  std::vector<double> out(static_cast<std::size_t>(pred.rows()), 0.0);
  const double eps = autodiff::kBceEpsilon;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      const double p = static_cast<double>(pred(r, c));
      const double t = static_cast<double>(target(r, c));
      if (kind == LossKind::bce) {
        const double q = std::min(std::max(p, eps), 1.0 - eps);
        acc -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
      } else {
        acc += (p - t) * (p - t);
      }
    }
    out[static_cast<std::size_t>(r)] = pred.cols() > 0 ? acc / static_cast<double>(pred.cols()) : 0.0;
  }
  return out;
}

template <typename T>
std::vector<DecoderTargets<T>> route_targets(const Model<T>& model, const Matrix<T>& x,
                                             const std::vector<Matrix<T>>& slot_targets) {
  const std::size_t k = model.config.decoder_count;
  if (slot_targets.size() != k) {
    throw ContractError("route_targets: " + std::to_string(slot_targets.size()) + " slots for " +
                        std::to_string(k) + " decoders");
  }
  for (const auto& t : slot_targets) {
    if (t.rows() != x.rows() || static_cast<std::size_t>(t.cols()) != model.config.input_width()) {
      throw DimensionError("route_targets: slot target shape does not match the batch");
    }
  }
  if (k == 1 || model.config.assignment == AssignmentStrategy::typed) return direct_targets(slot_targets);

  const Matrix<T> z = representation(model, x);
  // losses[s][j][row]
  std::vector<std::vector<std::vector<double>>> losses(k, std::vector<std::vector<double>>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const Matrix<T> pred = decode(model, j, z);
    for (std::size_t s = 0; s < k; ++s) losses[s][j] = per_row_loss(pred, slot_targets[s], model.config.loss);
  }

  std::vector<std::vector<std::size_t>> sources(k);
  std::vector<std::vector<std::size_t>> slots(k);
  Matrix<double> cost(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto row = static_cast<std::size_t>(r);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t j = 0; j < k; ++j) cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = losses[s][j][row];
    }
    const auto perm = assign_decoders(cost, model.config.assignment);
    for (std::size_t s = 0; s < k; ++s) {
      sources[perm[s]].push_back(row);
      slots[perm[s]].push_back(s);
    }
  }

  std::vector<DecoderTargets<T>> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    out[j].source = sources[j];
    out[j].target.resize(static_cast<Eigen::Index>(sources[j].size()), x.cols());
    for (std::size_t i = 0; i < sources[j].size(); ++i) {
      out[j].target.row(static_cast<Eigen::Index>(i)) =
          slot_targets[slots[j][i]].row(static_cast<Eigen::Index>(sources[j][i]));
    }
  }
  return out;
}

#define NBRENC_INSTANTIATE(T)                                                                               \
  template ObjectiveNoise<T> draw_objective_noise<T>(const ModelConfig&, const Matrix<T>&, Rng&);          \
  template std::vector<DecoderTargets<T>> direct_targets<T>(const std::vector<Matrix<T>>&);                \
  template ObjectiveNodes reconstruction_objective<T>(Tape<T>&, const ModelConfig&, const ParamStore<T>&,  \
                                                      const std::vector<const ParamStore<T>*>&,            \
                                                      const ObjectiveNoise<T>&,                            \
                                                      const std::vector<DecoderTargets<T>>&);              \
  template ObjectiveNodes reconstruction_objective<T>(Tape<T>&, const Model<T>&, const ObjectiveNoise<T>&, \
                                                      const std::vector<DecoderTargets<T>>&);              \
  template ObjectiveNodes reconstruction_objective<T>(Tape<T>&, const Model<T>&, const Matrix<T>&,         \
                                                      const std::vector<DecoderTargets<T>>&, Rng&);        \
  template ParamStore<T> merged_parameters<T>(const Model<T>&);                                            \
  template std::vector<double> per_row_loss<T>(const Matrix<T>&, const Matrix<T>&, LossKind);              \
  template std::vector<DecoderTargets<T>> route_targets<T>(const Model<T>&, const Matrix<T>&,              \
                                                           const std::vector<Matrix<T>>&);

NBRENC_INSTANTIATE(float)
NBRENC_INSTANTIATE(double)

#undef NBRENC_INSTANTIATE

}  // namespace nbrenc::models
