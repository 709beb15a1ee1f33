#pragma once

#include "nbrenc/cli/config.hpp"
#include "nbrenc/data/dataset.hpp"
#include "nbrenc/evaluation/metrics.hpp"
#include "nbrenc/models/model.hpp"
#include "nbrenc/neighbors/neighborhood.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nbrenc::cli {

inline constexpr const char* kVersion = "0.1.0";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitOther = 1;

// Maps a caught exception onto an exit code.
int exit_code_for(const std::exception& e);

struct LoadedData {
  data::LabeledDataset train;
  std::optional<data::LabeledDataset> test;
};

// Reads the configured sources, applies the column mask and the training
// subset. Feature counts of train and test must agree.
LoadedData load_data(const DataSpec& spec);

// Neighbor function for the configured spec over `train`. Static functions
// are computed once and returned on every call; the feature-space function
// re-encodes the data with the model it is given.
training::NeighborFn make_neighbor_fn(const NeighborSpec& spec, const DenseMatrix& train);

// The model config with the data width prepended to the encoder widths.
models::ModelConfig resolve_model(const RunConfig& config, std::size_t input_width);

// CSV writers. Values use %.9g so float32 values survive a round trip.
void write_matrix_csv(std::ostream& out, const DenseMatrix& m);
void write_history_csv(std::ostream& out, const training::TrainHistory& history);
// `sample,slot,neighbor,distance`, distance -1 where the function has no metric.
void write_neighbors_csv(std::ostream& out, const neighbors::NeighborAssignment& assignment);

DenseMatrix read_matrix_csv(const std::filesystem::path& path);

// Subcommands. Each writes its outputs under config.output_dir and logs the
// resolved configuration to `log`. Errors propagate as exceptions.
void run_train(const RunConfig& config, std::ostream& log);
void run_encode(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
// Representations come from the checkpoint unless both CSV files are given.
std::vector<evaluation::MetricsRecord> run_evaluate(const RunConfig& config,
                                                    const std::filesystem::path& checkpoint,
                                                    const std::optional<std::filesystem::path>& train_repr,
                                                    const std::optional<std::filesystem::path>& test_repr,
                                                    std::ostream& log);
// Feature-space neighbors use the checkpoint when it exists and the seeded
// untrained model otherwise.
void run_neighbors(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                   std::ostream& log);

// Full command line: subcommand plus flags. Returns the exit code and never
// throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nbrenc::cli
