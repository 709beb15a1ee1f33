#include "nbrenc/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace nbrenc::cli {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

// Reads one JSON object, remembering which keys were consumed, and records
// problems instead of throwing so that every mistake is reported at once.
class Section {
 public:
  Section(const nlohmann::json* obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (obj_ != nullptr && !obj_->is_object()) {
      problems_.push_back(path_ + ": expected an object");
      obj_ = nullptr;
    }
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json* raw(const std::string& key) {
    used_.insert(key);
    if (obj_ == nullptr) return nullptr;
    auto it = obj_->find(key);
    if (it == obj_->end() || it->is_null()) return nullptr;
    return &*it;
  }

  bool has(const std::string& key) {
    return raw(key) != nullptr;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const nlohmann::json* v = raw(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v->is_number_integer() || v->get<long long>() < 0) {
          problems_.push_back(key_path(key) + ": expected a non-negative integer");
          return;
        }
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) {
          problems_.push_back(key_path(key) + ": expected a number");
          return;
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) {
          problems_.push_back(key_path(key) + ": expected true or false");
          return;
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) {
          problems_.push_back(key_path(key) + ": expected a string");
          return;
        }
      }
      out = v->get<T>();
    } catch (const nlohmann::json::exception&) {
      problems_.push_back(key_path(key) + ": wrong type");
    }
  }

  template <typename T>
  void get_list(const std::string& key, std::vector<T>& out) {
    const nlohmann::json* v = raw(key);
    if (v == nullptr) return;
    if (!v->is_array()) {
      problems_.push_back(key_path(key) + ": expected a list");
      return;
    }
    try {
      std::vector<T> values;
      for (const auto& item : *v) {
        if constexpr (std::is_integral_v<T>) {
          if (!item.is_number_integer() || item.get<long long>() < 0) throw std::invalid_argument("int");
        }
        values.push_back(item.get<T>());
      }
      out = std::move(values);
    } catch (const std::exception&) {
      problems_.push_back(key_path(key) + ": list has entries of the wrong type");
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const std::string& key, Enum& out, Parse parse) {
    const nlohmann::json* v = raw(key);
    if (v == nullptr) return;
    if (!v->is_string()) {
      problems_.push_back(key_path(key) + ": expected a string");
      return;
    }
    try {
      out = parse(v->get<std::string>());
    } catch (const Error& e) {
      problems_.push_back(key_path(key) + ": " + e.what());
    }
  }

  void check_path(const std::string& key, const std::filesystem::path& p, bool check_files) {
    if (check_files && !std::filesystem::exists(p)) {
      problems_.push_back(key_path(key) + ": file '" + p.string() + "' does not exist");
    }
  }

  void error(const std::string& key, const std::string& message) { problems_.push_back(key_path(key) + ": " + message); }

  // Call last: flags keys that no getter asked for.
  void finish() {
    if (obj_ == nullptr) return;
    for (const auto& [key, value] : obj_->items()) {
      if (used_.count(key) == 0) problems_.push_back(key_path(key) + ": unknown key");
    }
  }

 private:
  const nlohmann::json* obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> used_;
};

DataFormat parse_format(const std::string& s) {
  if (s == "idx") return DataFormat::idx;
  if (s == "csv") return DataFormat::csv;
  if (s == "triplets") return DataFormat::triplets;
  if (s == "series") return DataFormat::series;
  throw ConfigError("unknown format '" + s + "' (idx|csv|triplets|series)");
}

NeighborKind parse_neighbor_kind(const std::string& s) {
  if (s == "simple") return NeighborKind::simple;
  if (s == "knn") return NeighborKind::knn;
  if (s == "feature") return NeighborKind::feature;
  if (s == "subspace") return NeighborKind::subspace;
  if (s == "temporal") return NeighborKind::temporal;
  if (s == "side_info") return NeighborKind::side_info;
  throw ConfigError("unknown neighbor function '" + s + "' (simple|knn|feature|subspace|temporal|side_info)");
}

DataSource parse_source(Section& parent, const std::string& key, DataFormat format, bool check_files,
                        std::vector<std::string>& problems) {
  Section s(parent.raw(key), parent.key_path(key), problems);
  DataSource src;
  std::string features;
  s.get("features", features);
  if (features.empty()) {
    s.error("features", "required");
  } else {
    src.features = features;
    s.check_path("features", src.features, check_files);
  }
  std::string labels;
  s.get("labels", labels);
  if (!labels.empty()) {
    src.labels = labels;
    s.check_path("labels", *src.labels, check_files);
  }
  if (format == DataFormat::idx && !src.labels) s.error("labels", "required for idx data");
  s.get("rows", src.rows);
  if (format == DataFormat::triplets && src.rows == 0) s.error("rows", "required (> 0) for triplet data");
  s.finish();
  return src;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : ConfigError(join_problems(problems)), problems_(std::move(problems)) {}

std::string to_string(DataFormat f) {
  switch (f) {
    case DataFormat::idx:
      return "idx";
    case DataFormat::csv:
      return "csv";
    case DataFormat::triplets:
      return "triplets";
    case DataFormat::series:
      return "series";
  }
  return "?";
}

std::string to_string(NeighborKind k) {
  switch (k) {
    case NeighborKind::simple:
      return "simple";
    case NeighborKind::knn:
      return "knn";
    case NeighborKind::feature:
      return "feature";
    case NeighborKind::subspace:
      return "subspace";
    case NeighborKind::temporal:
      return "temporal";
    case NeighborKind::side_info:
      return "side_info";
  }
  return "?";
}

std::size_t NeighborSpec::slot_count() const {
  switch (function) {
    case NeighborKind::knn:
      return k;
    case NeighborKind::subspace:
      return subspaces.size();
    case NeighborKind::temporal:
      return window <= 1 ? 1 : 2 * (window - 1);
    default:
      return 1;
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError({"--set '" + assignment + "': expected key=value"});
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  if (!doc.is_object()) doc = nlohmann::json::object();
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError({"--set '" + assignment + "': empty path component"});
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    nlohmann::json& child = (*node)[part];
    if (child.is_null()) child = nlohmann::json::object();
    if (!child.is_object()) throw ValidationError({"--set '" + assignment + "': '" + part + "' is not an object"});
    node = &child;
    start = dot + 1;
  }
}

RunConfig parse_config(const nlohmann::json& doc, bool check_files) {
  std::vector<std::string> problems;
  RunConfig cfg;
  Section root(&doc, "", problems);

  {
    Section s(root.raw("data"), "data", problems);
    if (!s.has("format")) s.error("format", "required");
    s.get_enum("format", cfg.data.format, parse_format);
    s.get("has_labels", cfg.data.has_labels);
    s.get("cols", cfg.data.cols);
    s.get_list("column_mask", cfg.data.column_mask);
    s.get("subset", cfg.data.subset);
    s.get("subset_seed", cfg.data.subset_seed);
    s.get("window_length", cfg.data.window_length);
    s.get("window_step", cfg.data.window_step);
    s.get("normalize", cfg.data.normalize);
    cfg.data.train = parse_source(s, "train", cfg.data.format, check_files, problems);
    if (s.has("test")) {
      if (cfg.data.format == DataFormat::series) {
        s.error("test", "series data derive the test pool from the training file");
      } else {
        cfg.data.test = parse_source(s, "test", cfg.data.format, check_files, problems);
      }
    }
    if (cfg.data.format == DataFormat::triplets && cfg.data.cols == 0) s.error("cols", "required (> 0) for triplet data");
    if (cfg.data.format == DataFormat::series) {
      if (cfg.data.window_length == 0) s.error("window_length", "must be >= 1");
      if (cfg.data.window_step == 0) s.error("window_step", "must be >= 1");
      if (!cfg.data.has_labels) s.error("has_labels", "series data need a segment label column");
    }
    s.finish();
  }

  {
    Section s(root.raw("model"), "model", problems);
    models::ModelConfig& m = cfg.model;
    m.encoder_widths = {256, 64};
    s.get_list("encoder_widths", m.encoder_widths);
    s.get("decoder_count", m.decoder_count);
    s.get_enum("variant", m.variant, models::parse_variant);
    s.get_enum("objective", m.objective, models::parse_objective);
    s.get("corruption_rate", m.corruption_rate);
    s.get_enum("loss", m.loss, models::parse_loss);
    s.get("kl_weight", m.kl_weight);
    s.get_enum("assignment", m.assignment, models::parse_assignment);
    s.get_enum("hidden_activation", m.hidden_activation, models::parse_activation);
    if (m.encoder_widths.empty()) s.error("encoder_widths", "needs at least the latent width");
    for (std::size_t w : m.encoder_widths) {
      if (w == 0) s.error("encoder_widths", "widths must be positive");
    }
    if (m.decoder_count == 0) s.error("decoder_count", "must be >= 1");
    if (!(m.corruption_rate >= 0.0 && m.corruption_rate <= 1.0)) s.error("corruption_rate", "must lie in [0, 1]");
    if (!(m.kl_weight >= 0.0)) s.error("kl_weight", "must be >= 0");
    s.finish();
  }

  bool refresh_given = false;
  {
    Section s(root.raw("neighbor"), "neighbor", problems);
    NeighborSpec& n = cfg.neighbor;
    s.get_enum("function", n.function, parse_neighbor_kind);
    s.get("proximity", n.proximity);
    s.get("k", n.k);
    s.get("window", n.window);
    if (const nlohmann::json* v = s.raw("subspaces")) {
      try {
        n.subspaces = v->get<std::vector<std::vector<std::size_t>>>();
      } catch (const nlohmann::json::exception&) {
        s.error("subspaces", "expected a list of dimension lists");
      }
    }
    std::string group;
    s.get("group_file", group);
    if (!group.empty()) {
      n.group_file = group;
      s.check_path("group_file", *n.group_file, check_files);
    }
    refresh_given = s.has("refresh_period");
    s.get("refresh_period", n.refresh_period);
    if (!refresh_given) n.refresh_period = n.function == NeighborKind::feature ? 1 : 0;
    s.get("seed", n.seed);

    if (n.proximity == 0) s.error("proximity", "must be >= 1 (1 = nearest neighbor)");
    if (n.k == 0) s.error("k", "must be >= 1");
    if (n.window == 0) s.error("window", "must be >= 1");
    if (n.function == NeighborKind::subspace && n.subspaces.empty()) s.error("subspaces", "required for subspace neighbors");
    for (const auto& sub : n.subspaces) {
      if (sub.empty()) s.error("subspaces", "subspaces must not be empty");
    }
    if (n.function == NeighborKind::side_info && !n.group_file) s.error("group_file", "required for side_info neighbors");
    if (cfg.model.objective == models::Objective::neighbor && n.slot_count() != cfg.model.decoder_count) {
      s.error("function", "'" + to_string(n.function) + "' yields " + std::to_string(n.slot_count()) +
                              " neighbor slot(s) but model.decoder_count is " +
                              std::to_string(cfg.model.decoder_count));
    }
    s.finish();
  }

  {
    Section s(root.raw("train"), "train", problems);
    training::TrainConfig& t = cfg.train;
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("seed", t.seed);
    s.get("lr", t.adam.lr);
    s.get("beta1", t.adam.beta1);
    s.get("beta2", t.adam.beta2);
    s.get("eps", t.adam.eps);
    s.get("shuffle", t.shuffle);
    t.refresh_period = cfg.neighbor.refresh_period;
    try {
      t.validate();
    } catch (const ConfigError& e) {
      problems.push_back(std::string("train: ") + e.what());
    }
    s.finish();
  }

  {
    Section s(root.raw("eval"), "eval", problems);
    EvalSpec& e = cfg.eval;
    s.get_list("tasks", e.tasks);
    s.get_list("sizes", e.sizes);
    s.get_list("seeds", e.seeds);
    s.get("cluster_on", e.cluster_on);
    s.get("clusters", e.kmeans.clusters);
    s.get("restarts", e.kmeans.restarts);
    s.get("max_iter", e.kmeans.max_iter);
    s.get("svm_lambda", e.svm.lambda);
    s.get("svm_epochs", e.svm.epochs);
    s.get("experiment", e.experiment);
    for (const auto& task : e.tasks) {
      if (task != "clustering" && task != "semisup") s.error("tasks", "unknown task '" + task + "' (clustering|semisup)");
    }
    if (e.cluster_on != "train" && e.cluster_on != "test") s.error("cluster_on", "must be 'train' or 'test'");
    if (e.kmeans.clusters == 0) s.error("clusters", "must be >= 1");
    if (e.kmeans.restarts == 0) s.error("restarts", "must be >= 1");
    if (e.kmeans.max_iter == 0) s.error("max_iter", "must be >= 1");
    if (!(e.svm.lambda > 0.0)) s.error("svm_lambda", "must be > 0");
    if (e.svm.epochs == 0) s.error("svm_epochs", "must be >= 1");
    for (std::size_t size : e.sizes) {
      if (size == 0) s.error("sizes", "sizes must be >= 1");
    }
    if (e.experiment.empty() || e.experiment.find_first_of(",\n") != std::string::npos) {
      s.error("experiment", "must be non-empty and contain no commas or newlines");
    }
    s.finish();
  }

  {
    Section s(root.raw("output"), "output", problems);
    std::string dir = cfg.output_dir.string();
    s.get("dir", dir);
    if (dir.empty()) s.error("dir", "must not be empty");
    cfg.output_dir = dir;
    s.finish();
  }

  root.finish();
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                      bool check_files) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open config file '" + path.string() + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError({"config file '" + path.string() + "' is not valid JSON: " + e.what()});
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc, check_files);
}

namespace {

nlohmann::json source_json(const DataSource& s) {
  nlohmann::json j;
  j["features"] = s.features.string();
  j["labels"] = s.labels ? nlohmann::json(s.labels->string()) : nlohmann::json(nullptr);
  j["rows"] = s.rows;
  return j;
}

}  // namespace

nlohmann::json resolved_json(const RunConfig& c) {
  nlohmann::json j;
  auto& d = j["data"];
  d["format"] = to_string(c.data.format);
  d["train"] = source_json(c.data.train);
  if (c.data.test) d["test"] = source_json(*c.data.test);
  d["has_labels"] = c.data.has_labels;
  d["cols"] = c.data.cols;
  d["column_mask"] = c.data.column_mask;
  d["subset"] = c.data.subset;
  d["subset_seed"] = c.data.subset_seed;
  d["window_length"] = c.data.window_length;
  d["window_step"] = c.data.window_step;
  d["normalize"] = c.data.normalize;

  auto& n = j["neighbor"];
  n["function"] = to_string(c.neighbor.function);
  n["proximity"] = c.neighbor.proximity;
  n["k"] = c.neighbor.k;
  n["window"] = c.neighbor.window;
  n["subspaces"] = c.neighbor.subspaces;
  n["group_file"] = c.neighbor.group_file ? nlohmann::json(c.neighbor.group_file->string()) : nlohmann::json(nullptr);
  n["refresh_period"] = c.neighbor.refresh_period;
  n["seed"] = c.neighbor.seed;

  j["model"] = models::to_json(c.model);

  auto& t = j["train"];
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["seed"] = c.train.seed;
  t["lr"] = c.train.adam.lr;
  t["beta1"] = c.train.adam.beta1;
  t["beta2"] = c.train.adam.beta2;
  t["eps"] = c.train.adam.eps;
  t["shuffle"] = c.train.shuffle;

  auto& e = j["eval"];
  e["tasks"] = c.eval.tasks;
  e["sizes"] = c.eval.sizes;
  e["seeds"] = c.eval.seeds;
  e["cluster_on"] = c.eval.cluster_on;
  e["clusters"] = c.eval.kmeans.clusters;
  e["restarts"] = c.eval.kmeans.restarts;
  e["max_iter"] = c.eval.kmeans.max_iter;
  e["svm_lambda"] = c.eval.svm.lambda;
  e["svm_epochs"] = c.eval.svm.epochs;
  e["experiment"] = c.eval.experiment;

  j["output"]["dir"] = c.output_dir.string();
  return j;
}

}  // namespace nbrenc::cli
