#include "nbrenc/cli/commands.hpp"

#include "nbrenc/data/loaders.hpp"
#include "nbrenc/data/timeseries.hpp"
#include "nbrenc/evaluation/kmeans.hpp"
#include "nbrenc/evaluation/protocol.hpp"
#include "nbrenc/random.hpp"
#include "nbrenc/training/checkpoint.hpp"
#include "nbrenc/training/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace nbrenc::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitValidation;
  if (dynamic_cast<const TrainingError*>(&e) != nullptr) return kExitNumeric;
  if (dynamic_cast<const FormatError*>(&e) != nullptr || dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const InputError*>(&e) != nullptr || dynamic_cast<const DimensionError*>(&e) != nullptr ||
      dynamic_cast<const ContractError*>(&e) != nullptr) {
    return kExitData;
  }
  return kExitOther;
}

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void log_header(const RunConfig& config, const std::string& command, std::ostream& log) {
  log << "nbrenc " << kVersion << " " << command << "\n";
  log << "resolved config: " << resolved_json(config).dump() << "\n";
  log << "seed: " << config.train.seed << "\n";
}

data::LabeledDataset load_source(const DataSpec& spec, const DataSource& src) {
  switch (spec.format) {
    case DataFormat::idx:
      return data::load_idx(src.features, *src.labels);
    case DataFormat::csv:
    case DataFormat::series:
      return data::load_dense_csv(src.features, spec.has_labels);
    case DataFormat::triplets: {
      data::LabeledDataset ds;
      ds.features = data::load_sparse_triplets(src.features, src.rows, spec.cols).densify();
      if (src.labels) ds.labels = data::load_labels(*src.labels);
      ds.validate();
      return ds;
    }
  }
  throw ConfigError("unsupported data format");
}

data::LabeledDataset apply_mask(const data::LabeledDataset& ds, const std::vector<std::size_t>& mask) {
  if (mask.empty()) return ds;
  return data::select_columns(ds, std::span<const std::size_t>(mask));
}

}  // namespace

LoadedData load_data(const DataSpec& spec) {
  LoadedData out;
  if (spec.format == DataFormat::series) {
    const data::LabeledDataset raw = apply_mask(load_source(spec, spec.train), spec.column_mask);
    auto split = data::windowed_split(raw.features, *raw.labels, spec.window_length, spec.window_step, spec.normalize);
    if (split.train.size() == 0) throw InputError("no training windows fit inside the segment halves");
    out.train = std::move(split.train);
    out.test = std::move(split.test);
  } else {
    out.train = apply_mask(load_source(spec, spec.train), spec.column_mask);
    if (spec.test) out.test = apply_mask(load_source(spec, *spec.test), spec.column_mask);
  }
  out.train.validate();
  if (out.test) {
    out.test->validate();
    if (out.test->dims() != out.train.dims()) {
      throw InputError("test data have " + std::to_string(out.test->dims()) + " features, training data " +
                       std::to_string(out.train.dims()));
    }
  }
  if (out.train.size() == 0) throw InputError("training data are empty");
  if (spec.subset > 0 && spec.subset < out.train.size()) {
    if (out.train.labels) {
      out.train = data::stratified_subset(out.train, spec.subset, spec.subset_seed);
    } else {
      std::vector<std::size_t> rows(out.train.size());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      Rng rng(spec.subset_seed);
      fisher_yates(rows, rng);
      rows.resize(spec.subset);
      std::sort(rows.begin(), rows.end());
      out.train = data::select_rows(out.train, std::span<const std::size_t>(rows));
    }
  }
  return out;
}

training::NeighborFn make_neighbor_fn(const NeighborSpec& spec, const DenseMatrix& train) {
  using neighbors::NeighborAssignment;
  const auto n = static_cast<std::size_t>(train.rows());
  auto fixed = [](NeighborAssignment a) {
    return [a = std::move(a)](const models::Model<float>&) { return a; };
  };
  switch (spec.function) {
    case NeighborKind::simple:
      return fixed(neighbors::simple_neighbors(train, spec.proximity));
    case NeighborKind::knn:
      return fixed(neighbors::nearest_k_neighbors(train, spec.k));
    case NeighborKind::subspace:
      return fixed(neighbors::subspace_neighbors(train, neighbors::SubspaceSpec{spec.subspaces}));
    case NeighborKind::temporal:
      return fixed(neighbors::temporal_neighbors(n, spec.window));
    case NeighborKind::side_info:
      return fixed(neighbors::side_info_neighbors(neighbors::load_side_info_groups(*spec.group_file), n, spec.seed));
    case NeighborKind::feature: {
      const std::size_t proximity = spec.proximity;
      return [&train, proximity](const models::Model<float>& model) {
        const neighbors::EncoderFn enc = [&model](const DenseMatrix& x) { return training::encode_all(model, x); };
        return neighbors::feature_space_neighbors(train, enc, proximity);
      };
    }
  }
  throw ConfigError("unsupported neighbor function");
}

models::ModelConfig resolve_model(const RunConfig& config, std::size_t input_width) {
  models::ModelConfig m = config.model;
  m.encoder_widths.insert(m.encoder_widths.begin(), input_width);
  m.validate();
  return m;
}

void write_matrix_csv(std::ostream& out, const DenseMatrix& m) {
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(m(r, c)));
      if (c > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_history_csv(std::ostream& out, const training::TrainHistory& history) {
  out << "epoch,mean_loss,wall_seconds,neighbor_change\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << fmt("%.9g", e.mean_loss) << ',' << fmt("%.3f", e.wall_seconds) << ',';
    if (e.neighbor_change) out << fmt("%.6f", *e.neighbor_change);
    out << '\n';
  }
}

void write_neighbors_csv(std::ostream& out, const neighbors::NeighborAssignment& assignment) {
  out << "sample,slot,neighbor,distance\n";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    for (const auto& e : assignment.entries[i]) {
      out << i << ',' << e.slot << ',' << e.neighbor << ',';
      if (e.distance == neighbors::kNoDistance) {
        out << "-1";
      } else {
        out << fmt("%.9g", e.distance);
      }
      out << '\n';
    }
  }
}

DenseMatrix read_matrix_csv(const fs::path& path) {
  return data::load_dense_csv(path, false).features;
}

void run_train(const RunConfig& config, std::ostream& log) {
  log_header(config, "train", log);
  const LoadedData loaded = load_data(config.data);
  const DenseMatrix& x = loaded.train.features;
  log << "training rows: " << x.rows() << ", features: " << x.cols() << "\n";
  const models::ModelConfig model_config = resolve_model(config, static_cast<std::size_t>(x.cols()));
  models::Model<float> model = models::init_model<float>(model_config, config.train.seed);

  training::NeighborFn neighbor_fn;
  if (model_config.objective == models::Objective::neighbor) {
    const training::NeighborFn inner = make_neighbor_fn(config.neighbor, x);
    neighbor_fn = [inner, &log](const models::Model<float>& m) {
      auto a = inner(m);
      const std::size_t isolated = a.isolated_count();
      if (isolated > 0) log << "neighbors: " << isolated << " isolated sample(s) reconstruct themselves\n";
      return a;
    };
  }

  ensure_dir(config.output_dir);
  {
    auto out = open_output(config.output_dir / "resolved_config.json");
    out << resolved_json(config).dump(2) << "\n";
  }
  auto on_epoch = [&log](const training::EpochRecord& e) {
    log << "epoch " << e.epoch << " loss " << fmt("%.6f", e.mean_loss) << " time " << fmt("%.2f", e.wall_seconds)
        << "s";
    if (e.neighbor_change) log << " neighbor_change " << fmt("%.4f", *e.neighbor_change);
    log << "\n";
  };

  try {
    training::TrainResult result = training::train(std::move(model), x, neighbor_fn, config.train, on_epoch);
    training::save_checkpoint(result.model, config.output_dir / "model.nbrc");
    auto hist = open_output(config.output_dir / "history.csv");
    write_history_csv(hist, result.history);
  } catch (const training::TrainingAborted& e) {
    training::save_checkpoint(e.last_good(), config.output_dir / "model.nbrc");
    auto hist = open_output(config.output_dir / "history.csv");
    write_history_csv(hist, e.history());
    log << "training aborted: " << e.what() << "; last good model saved\n";
    throw;
  }
  log << "wrote " << (config.output_dir / "model.nbrc").string() << "\n";
}

namespace {

models::Model<float> load_compatible(const fs::path& checkpoint, std::size_t dims) {
  models::Model<float> model = training::load_checkpoint(checkpoint);
  if (model.config.input_width() != dims) {
    throw ContractError("checkpoint expects " + std::to_string(model.config.input_width()) +
                        " input features, data have " + std::to_string(dims));
  }
  return model;
}

}  // namespace

void run_encode(const RunConfig& config, const fs::path& checkpoint, std::ostream& log) {
  log_header(config, "encode", log);
  const LoadedData loaded = load_data(config.data);
  const models::Model<float> model = load_compatible(checkpoint, loaded.train.dims());
  ensure_dir(config.output_dir);
  {
    auto out = open_output(config.output_dir / "train_repr.csv");
    write_matrix_csv(out, training::encode_all(model, loaded.train.features));
  }
  if (loaded.test) {
    auto out = open_output(config.output_dir / "test_repr.csv");
    write_matrix_csv(out, training::encode_all(model, loaded.test->features));
  }
  log << "wrote representations to " << config.output_dir.string() << "\n";
}

std::vector<evaluation::MetricsRecord> run_evaluate(const RunConfig& config, const fs::path& checkpoint,
                                                    const std::optional<fs::path>& train_repr_path,
                                                    const std::optional<fs::path>& test_repr_path,
                                                    std::ostream& log) {
  log_header(config, "evaluate", log);
  const LoadedData loaded = load_data(config.data);
  if (!loaded.train.labels) throw InputError("evaluation needs training labels");

  DenseMatrix train_repr;
  std::optional<DenseMatrix> test_repr;
  if (train_repr_path) {
    train_repr = read_matrix_csv(*train_repr_path);
    if (test_repr_path) test_repr = read_matrix_csv(*test_repr_path);
  } else {
    const models::Model<float> model = load_compatible(checkpoint, loaded.train.dims());
    train_repr = training::encode_all(model, loaded.train.features);
    if (loaded.test) test_repr = training::encode_all(model, loaded.test->features);
  }
  if (static_cast<std::size_t>(train_repr.rows()) != loaded.train.size()) {
    throw InputError("training representation has " + std::to_string(train_repr.rows()) + " rows, labels " +
                     std::to_string(loaded.train.size()));
  }
  if (test_repr) {
    if (!loaded.test || !loaded.test->labels) throw InputError("test representation given without labeled test data");
    if (static_cast<std::size_t>(test_repr->rows()) != loaded.test->size()) {
      throw InputError("test representation has " + std::to_string(test_repr->rows()) + " rows, labels " +
                       std::to_string(loaded.test->size()));
    }
  }

  std::vector<evaluation::MetricsRecord> records;
  for (const auto& task : config.eval.tasks) {
    if (task == "clustering") {
      const bool on_test = config.eval.cluster_on == "test" && test_repr;
      const DenseMatrix& points = on_test ? *test_repr : train_repr;
      const LabelVector& truth = on_test ? *loaded.test->labels : *loaded.train.labels;
      for (std::uint64_t seed : config.eval.seeds) {
        evaluation::KMeansOptions opts = config.eval.kmeans;
        opts.seed = seed;
        const auto result = evaluation::kmeans(points, opts);
        const std::string exp = config.eval.experiment;
        records.push_back({exp, seed, std::nullopt, "ARI", evaluation::adjusted_rand_index(result.labels, truth)});
        records.push_back({exp, seed, std::nullopt, "NMI", evaluation::normalized_mutual_information(result.labels, truth)});
        records.push_back({exp, seed, std::nullopt, "ACC", evaluation::clustering_accuracy(result.labels, truth)});
      }
    } else if (task == "semisup") {
      if (!test_repr) throw InputError("the semisup task needs labeled test data");
      evaluation::ProtocolOptions opts;
      opts.experiment = config.eval.experiment;
      opts.sizes = config.eval.sizes;
      opts.seeds = config.eval.seeds;
      opts.svm = config.eval.svm;
      auto rows = evaluation::semisupervised_protocol(train_repr, *loaded.train.labels, *test_repr,
                                                      *loaded.test->labels, opts);
      records.insert(records.end(), rows.begin(), rows.end());
    }
  }
  ensure_dir(config.output_dir);
  auto out = open_output(config.output_dir / "metrics.csv");
  evaluation::write_metrics_csv(out, records);
  log << "wrote " << records.size() << " metric rows\n";
  return records;
}

void run_neighbors(const RunConfig& config, const std::optional<fs::path>& checkpoint, std::ostream& log) {
  log_header(config, "neighbors", log);
  const LoadedData loaded = load_data(config.data);
  const DenseMatrix& x = loaded.train.features;
  models::Model<float> model;
  if (config.neighbor.function == NeighborKind::feature) {
    if (checkpoint && fs::exists(*checkpoint)) {
      model = load_compatible(*checkpoint, static_cast<std::size_t>(x.cols()));
    } else {
      model = models::init_model<float>(resolve_model(config, static_cast<std::size_t>(x.cols())), config.train.seed);
    }
  }
  const auto assignment = make_neighbor_fn(config.neighbor, x)(model);
  ensure_dir(config.output_dir);
  auto out = open_output(config.output_dir / "neighbors.csv");
  write_neighbors_csv(out, assignment);
  log << "wrote neighbors for " << assignment.size() << " samples (" << assignment.isolated_count()
      << " isolated)\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neighbor-encoder representation learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("nbrenc ") + kVersion);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string checkpoint;
  std::string train_repr;
  std::string test_repr;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--set", overrides, "Override a config value, e.g. train.epochs=5 (repeatable)");
    sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  };
  CLI::App* train = app.add_subcommand("train", "Train a model and write model.nbrc and history.csv");
  add_common(train);
  CLI::App* encode = app.add_subcommand("encode", "Write train_repr.csv / test_repr.csv from a checkpoint");
  add_common(encode);
  encode->add_option("--checkpoint", checkpoint, "Checkpoint (default OUT/model.nbrc)");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Clustering and semi-supervised metrics into metrics.csv");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint (default OUT/model.nbrc)");
  evaluate->add_option("--train-repr", train_repr, "Precomputed training representation CSV");
  evaluate->add_option("--test-repr", test_repr, "Precomputed test representation CSV");
  CLI::App* nbrs = app.add_subcommand("neighbors", "Write neighbors.csv for the configured neighbor function");
  add_common(nbrs);
  nbrs->add_option("--checkpoint", checkpoint, "Model for feature-space neighbors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    std::vector<std::string> all = overrides;
    if (!out_dir.empty()) all.push_back("output.dir=" + nlohmann::json(out_dir).dump());
    const RunConfig config = load_config(config_path, all);
    const fs::path ckpt = checkpoint.empty() ? config.output_dir / "model.nbrc" : fs::path(checkpoint);
    if (train->parsed()) {
      run_train(config, err);
    } else if (encode->parsed()) {
      run_encode(config, ckpt, err);
    } else if (evaluate->parsed()) {
      std::optional<fs::path> tr;
      std::optional<fs::path> te;
      if (!train_repr.empty()) tr = train_repr;
      if (!test_repr.empty()) te = test_repr;
      if (!tr && te) throw ValidationError({"--test-repr requires --train-repr"});
      run_evaluate(config, ckpt, tr, te, err);
    } else if (nbrs->parsed()) {
      std::optional<fs::path> c;
      if (!checkpoint.empty()) c = checkpoint;
      run_neighbors(config, c, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace nbrenc::cli
