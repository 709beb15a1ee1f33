#pragma once

#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/errors.hpp"
#include "nbrenc/matrix.hpp"
#include "nbrenc/models/model.hpp"
#include "nbrenc/neighbors/neighborhood.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace nbrenc::training {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  autodiff::AdamHyper adam;
  // Recompute neighbors through the current model every `refresh_period`
  // epochs; 0 keeps the initial assignment.
  std::size_t refresh_period = 0;
  bool shuffle = true;

  // Throws ConfigError.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
  // Set for epochs that started with a neighbor refresh.
  std::optional<double> neighbor_change;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  // Samples of the initial assignment that train against themselves.
  std::size_t isolated_samples = 0;

  // Compares everything except wall time.
  bool same_trajectory(const TrainHistory& other) const;
};

// Returns the assignment for the current model state. Called once before the
// first epoch and again at every refresh.
using NeighborFn = std::function<neighbors::NeighborAssignment(const models::Model<float>&)>;

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  models::Model<float> model;
  TrainHistory history;
};

// Thrown when a batch loss or gradient becomes non-finite. The model is the
// state before the offending step, so every parameter is finite.
class TrainingAborted : public TrainingError {
 public:
  TrainingAborted(const std::string& what, models::Model<float> last_good, TrainHistory history,
                  std::size_t epoch, std::size_t step)
      : TrainingError(what),
        last_good_(std::move(last_good)),
        history_(std::move(history)),
        epoch_(epoch),
        step_(step) {}

  const models::Model<float>& last_good() const { return last_good_; }
  const TrainHistory& history() const { return history_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  models::Model<float> last_good_;
  TrainHistory history_;
  std::size_t epoch_;
  std::size_t step_;
};

// Per-slot neighbor row of every sample. Slots without an entry and isolated
// samples point at the sample itself. Throws ContractError when the slot
// count differs from `decoder_count` or the assignment is malformed.
std::vector<std::vector<std::size_t>> slot_sources(const neighbors::NeighborAssignment& assignment,
                                                   std::size_t samples, std::size_t decoder_count);

// Mini-batch Adam training. For the self objective `neighbor_fn` may be empty
// and every decoder reconstructs the input. Each epoch visits every sample
// once in a seeded shuffle; the last partial batch is kept.
TrainResult train(models::Model<float> model, const DenseMatrix& data, const NeighborFn& neighbor_fn,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Representation of every row, computed in chunks.
DenseMatrix encode_all(const models::Model<float>& model, const DenseMatrix& data,
                       std::size_t chunk = 4096);

}  // namespace nbrenc::training
