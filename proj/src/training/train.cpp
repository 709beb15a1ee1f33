#include "nbrenc/training/train.hpp"

#include "nbrenc/autodiff/tape.hpp"
#include "nbrenc/models/objective.hpp"
#include "nbrenc/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace nbrenc::training {

using models::Model;
using neighbors::NeighborAssignment;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw ConfigError("learning rate must be positive and finite");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
}

bool TrainHistory::same_trajectory(const TrainHistory& other) const {
  if (isolated_samples != other.isolated_samples || epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.mean_loss != b.mean_loss || a.neighbor_change != b.neighbor_change) return false;
  }
  return true;
}

std::vector<std::vector<std::size_t>> slot_sources(const NeighborAssignment& assignment, std::size_t samples,
                                                   std::size_t decoder_count) {
  if (assignment.size() != samples) {
    throw ContractError("neighbor assignment covers " + std::to_string(assignment.size()) + " samples, data has " +
                        std::to_string(samples));
  }
  if (assignment.slot_count != decoder_count) {
    throw ContractError("neighbor assignment has " + std::to_string(assignment.slot_count) +
                        " slots but the model has " + std::to_string(decoder_count) + " decoders");
  }
  assignment.validate();
  std::vector<std::vector<std::size_t>> out(decoder_count, std::vector<std::size_t>(samples));
  for (auto& slot : out) std::iota(slot.begin(), slot.end(), std::size_t{0});
  for (std::size_t i = 0; i < samples; ++i) {
    std::vector<bool> seen(decoder_count, false);
    for (const auto& e : assignment.entries[i]) {
      if (seen[e.slot]) {
        throw ContractError("sample " + std::to_string(i) + " has two neighbors in slot " + std::to_string(e.slot));
      }
      seen[e.slot] = true;
      out[e.slot][i] = e.neighbor;
    }
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> self_sources(std::size_t samples, std::size_t decoder_count) {
  std::vector<std::vector<std::size_t>> out(decoder_count, std::vector<std::size_t>(samples));
  for (auto& slot : out) std::iota(slot.begin(), slot.end(), std::size_t{0});
  return out;
}

NeighborAssignment checked_assignment(const NeighborFn& fn, const Model<float>& model) {
  NeighborAssignment a = fn(model);
  a.validate();
  return a;
}

// Splits the merged gradient map by owning store and applies Adam to each.
void apply_adam(Model<float>& model, autodiff::Gradients<float>& grads, const autodiff::AdamHyper& hyper) {
  auto take = [&grads](const autodiff::ParamStore<float>& store) {
    autodiff::Gradients<float> part;
    for (const auto& [name, value] : store.params()) {
      auto it = grads.find(name);
      if (it != grads.end()) part.emplace(name, std::move(it->second));
    }
    return part;
  };
  auto enc = take(model.encoder);
  autodiff::adam_step(model.encoder, enc, hyper);
  for (auto& d : model.decoders) {
    auto part = take(d);
    autodiff::adam_step(d, part, hyper);
  }
}

std::string first_non_finite(const autodiff::Gradients<float>& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) return name;
  }
  return {};
}

}  // namespace

TrainResult train(Model<float> model, const DenseMatrix& data, const NeighborFn& neighbor_fn,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.config.validate();
  const auto n = static_cast<std::size_t>(data.rows());
  if (n == 0) throw InputError("training data is empty");
  if (static_cast<std::size_t>(data.cols()) != model.config.input_width()) {
    throw DimensionError("training data has " + std::to_string(data.cols()) + " columns, model expects " +
                         std::to_string(model.config.input_width()));
  }
  const std::size_t k = model.config.decoder_count;
  const bool self_objective = model.config.objective == models::Objective::self;
  if (!self_objective && !neighbor_fn) throw ContractError("neighbor objective needs a neighbor function");

  TrainHistory history;
  NeighborAssignment assignment;
  std::vector<std::vector<std::size_t>> sources;
  if (self_objective) {
    sources = self_sources(n, k);
  } else {
    assignment = checked_assignment(neighbor_fn, model);
    sources = slot_sources(assignment, n, k);
    history.isolated_samples = assignment.isolated_count();
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;

    if (!self_objective && config.refresh_period > 0 && epoch > 1 && (epoch - 1) % config.refresh_period == 0) {
      NeighborAssignment fresh = checked_assignment(neighbor_fn, model);
      record.neighbor_change = neighbors::change_fraction(assignment, fresh);
      sources = slot_sources(fresh, n, k);
      assignment = std::move(fresh);
    }

    if (config.shuffle) fisher_yates(order, rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const DenseMatrix x = gather_rows(data, rows);

      std::vector<DenseMatrix> slot_targets;
      slot_targets.reserve(k);
      for (std::size_t s = 0; s < k; ++s) {
        std::vector<std::size_t> src(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) src[r] = sources[s][rows[r]];
        slot_targets.push_back(gather_rows(data, std::span<const std::size_t>(src)));
      }

      const auto routed = models::route_targets(model, x, slot_targets);
      autodiff::Tape<float> tape;
      const auto nodes = models::reconstruction_objective(tape, model, x, routed, rng);
      const float loss = tape.scalar(nodes.loss);
      ++step;
      if (!std::isfinite(loss)) {
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step),
                              model, history, epoch, step);
      }
      autodiff::Gradients<float> grads = tape.backward(nodes.loss);
      const std::string bad = first_non_finite(grads);
      if (!bad.empty()) {
        throw TrainingAborted("non-finite gradient for parameter '" + bad + "' at epoch " + std::to_string(epoch) +
                                  ", step " + std::to_string(step),
                              model, history, epoch, step);
      }
      apply_adam(model, grads, config.adam);
      loss_sum += static_cast<double>(loss) * static_cast<double>(rows.size());
    }

    record.mean_loss = loss_sum / static_cast<double>(n);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return {std::move(model), std::move(history)};
}

DenseMatrix encode_all(const Model<float>& model, const DenseMatrix& data, std::size_t chunk) {
  if (chunk == 0) throw InputError("encode chunk size must be positive");
  const auto n = data.rows();
  const auto m = static_cast<Eigen::Index>(model.config.latent_width());
  DenseMatrix out(n, m);
  for (Eigen::Index begin = 0; begin < n; begin += static_cast<Eigen::Index>(chunk)) {
    const Eigen::Index count = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), n - begin);
    const DenseMatrix part = data.middleRows(begin, count);
    out.middleRows(begin, count) = models::representation(model, part);
  }
  return out;
}

}  // namespace nbrenc::training
