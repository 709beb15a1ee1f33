#pragma once

#include "nbrenc/errors.hpp"
#include "nbrenc/evaluation/kmeans.hpp"
#include "nbrenc/evaluation/svm.hpp"
#include "nbrenc/models/model.hpp"
#include "nbrenc/training/train.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nbrenc::cli {

// Every problem found in a configuration, reported together.
class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class DataFormat { idx, csv, triplets, series };

struct DataSource {
  std::filesystem::path features;
  std::optional<std::filesystem::path> labels;  // idx and triplets
  std::size_t rows = 0;                         // triplets only
};

struct DataSpec {
  DataFormat format = DataFormat::csv;
  DataSource train;
  std::optional<DataSource> test;  // series data derive the test pool from `train`
  bool has_labels = true;          // csv and series: last column is the label
  std::size_t cols = 0;            // triplets only
  std::vector<std::size_t> column_mask;  // empty keeps every column
  std::size_t subset = 0;                // 0 keeps every training row
  std::uint64_t subset_seed = 0;
  std::size_t window_length = 100;  // series only
  std::size_t window_step = 1;
  bool normalize = true;
};

enum class NeighborKind { simple, knn, feature, subspace, temporal, side_info };

struct NeighborSpec {
  NeighborKind function = NeighborKind::simple;
  std::size_t proximity = 1;
  std::size_t k = 1;
  std::size_t window = 2;
  std::vector<std::vector<std::size_t>> subspaces;
  std::optional<std::filesystem::path> group_file;
  std::size_t refresh_period = 0;  // default 1 for `feature`, 0 otherwise
  std::uint64_t seed = 0;

  // Number of slots the neighbor function produces.
  std::size_t slot_count() const;
};

struct EvalSpec {
  std::vector<std::string> tasks = {"clustering", "semisup"};
  std::vector<std::size_t> sizes = {100, 1000};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string cluster_on = "test";  // "train" or "test"
  evaluation::KMeansOptions kmeans;
  evaluation::SvmOptions svm;
  std::string experiment = "run";
};

struct RunConfig {
  DataSpec data;
  NeighborSpec neighbor;
  // encoder_widths here exclude the input width, which comes from the data.
  models::ModelConfig model;
  training::TrainConfig train;
  EvalSpec eval;
  std::filesystem::path output_dir = "out";
};

// Applies a `dotted.path=value` override to a JSON document. The value is
// parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Validates and fills defaults. Unknown keys, bad enum names, out-of-range
// values and missing files are collected and thrown as one ValidationError.
RunConfig parse_config(const nlohmann::json& doc, bool check_files = true);
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                      bool check_files = true);

// The fully resolved configuration, defaults included.
nlohmann::json resolved_json(const RunConfig& config);

std::string to_string(DataFormat f);
std::string to_string(NeighborKind k);

}  // namespace nbrenc::cli
