#include "nbrenc/models/model.hpp"

#include "nbrenc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nbrenc::models {

using autodiff::Activation;
using autodiff::LayerSpec;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::vanilla:
      return "vanilla";
    case Variant::denoising:
      return "denoising";
    case Variant::variational:
      return "variational";
  }
  return "?";
}

std::string to_string(Objective o) { return o == Objective::self ? "self" : "neighbor"; }

std::string to_string(LossKind l) { return l == LossKind::bce ? "bce" : "mse"; }

std::string to_string(AssignmentStrategy s) {
  switch (s) {
    case AssignmentStrategy::typed:
      return "typed";
    case AssignmentStrategy::matched:
      return "matched";
    case AssignmentStrategy::greedy:
      return "greedy";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::tanh:
      return "tanh";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "vanilla") return Variant::vanilla;
  if (s == "denoising") return Variant::denoising;
  if (s == "variational") return Variant::variational;
  throw ConfigError("unknown variant '" + s + "' (vanilla|denoising|variational)");
}

Objective parse_objective(const std::string& s) {
  if (s == "self") return Objective::self;
  if (s == "neighbor") return Objective::neighbor;
  throw ConfigError("unknown objective '" + s + "' (self|neighbor)");
}

LossKind parse_loss(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + s + "' (bce|mse)");
}

AssignmentStrategy parse_assignment(const std::string& s) {
  if (s == "typed") return AssignmentStrategy::typed;
  if (s == "matched") return AssignmentStrategy::matched;
  if (s == "greedy") return AssignmentStrategy::greedy;
  throw ConfigError("unknown assignment strategy '" + s + "' (typed|matched|greedy)");
}

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "' (identity|relu|sigmoid|tanh)");
}

void ModelConfig::validate() const {
  if (encoder_widths.size() < 2) throw ConfigError("encoder_widths needs an input and a latent width");
  for (std::size_t w : encoder_widths) {
    if (w == 0) throw ConfigError("encoder widths must be positive");
  }
  if (decoder_count < 1) throw ConfigError("decoder_count must be >= 1");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw ConfigError("corruption_rate must lie in [0, 1]");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) throw ConfigError("kl_weight must be finite and >= 0");
}

std::vector<LayerSpec> ModelConfig::encoder_layers() const {
  std::vector<LayerSpec> layers;
  for (std::size_t l = 1; l < encoder_widths.size(); ++l) {
    const bool last = l + 1 == encoder_widths.size();
    std::size_t width = encoder_widths[l];
    if (last && variant == Variant::variational) width *= 2;
    layers.push_back({width, last ? Activation::identity : hidden_activation});
  }
  return layers;
}

std::vector<LayerSpec> ModelConfig::decoder_layers() const {
  std::vector<LayerSpec> layers;
  for (std::size_t l = encoder_widths.size() - 1; l-- > 0;) {
    const bool last = l == 0;
    const Activation out = loss == LossKind::bce ? Activation::sigmoid : Activation::identity;
    layers.push_back({encoder_widths[l], last ? out : hidden_activation});
  }
  return layers;
}

namespace {

const std::set<std::string> kModelKeys = {"encoder_widths", "decoder_count", "variant", "objective",
                                          "corruption_rate", "loss", "kl_weight", "assignment",
                                          "hidden_activation"};

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["encoder_widths"] = c.encoder_widths;
  j["decoder_count"] = c.decoder_count;
  j["variant"] = to_string(c.variant);
  j["objective"] = to_string(c.objective);
  j["corruption_rate"] = c.corruption_rate;
  j["loss"] = to_string(c.loss);
  j["kl_weight"] = c.kl_weight;
  j["assignment"] = to_string(c.assignment);
  j["hidden_activation"] = to_string(c.hidden_activation);
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (kModelKeys.count(key) == 0) throw ConfigError("unknown model config key '" + key + "'");
  }
  for (const auto& key : kModelKeys) {
    if (!j.contains(key)) throw ConfigError("model config is missing '" + key + "'");
  }
  ModelConfig c;
  try {
    c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
    c.decoder_count = j.at("decoder_count").get<std::size_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.objective = parse_objective(j.at("objective").get<std::string>());
    c.corruption_rate = j.at("corruption_rate").get<double>();
    c.loss = parse_loss(j.at("loss").get<std::string>());
    c.kl_weight = j.at("kl_weight").get<double>();
    c.assignment = parse_assignment(j.at("assignment").get<std::string>());
    c.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string decoder_prefix(std::size_t decoder) { return "dec" + std::to_string(decoder); }

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> Model<T>::all_parameters() const {
  std::vector<std::pair<std::string, const Matrix<T>*>> out;
  for (const auto& [name, value] : encoder.params()) out.emplace_back(name, &value);
  for (const auto& d : decoders) {
    for (const auto& [name, value] : d.params()) out.emplace_back(name, &value);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

template <typename T>
Matrix<T>& Model<T>::parameter(const std::string& name) {
  if (encoder.contains(name)) return encoder.at(name);
  for (auto& d : decoders) {
    if (d.contains(name)) return d.at(name);
  }
  throw ContractError("model has no parameter '" + name + "'");
}

template <typename T>
bool Model<T>::same_parameters(const Model& other) const {
  if (!(config == other.config) || decoders.size() != other.decoders.size()) return false;
  if (!(encoder == other.encoder)) return false;
  for (std::size_t j = 0; j < decoders.size(); ++j) {
    if (!(decoders[j] == other.decoders[j])) return false;
  }
  return true;
}

template <typename T>
Model<T> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model<T> model;
  model.config = config;
  const auto enc = config.encoder_layers();
  const auto dec = config.decoder_layers();
  autodiff::init_mlp(model.encoder, kEncoderPrefix, config.input_width(), std::span<const LayerSpec>(enc), rng);
  model.decoders.resize(config.decoder_count);
  for (std::size_t j = 0; j < config.decoder_count; ++j) {
    autodiff::init_mlp(model.decoders[j], decoder_prefix(j), config.latent_width(), std::span<const LayerSpec>(dec), rng);
  }
  return model;
}

template <typename T>
Matrix<T> corrupt(const Matrix<T>& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InputError("corruption rate must lie in [0, 1]");
  Matrix<T> out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (uniform01(rng) < rate) out.data()[i] = T(0);
  }
  return out;
}

template <typename T>
Encoding<T> encode(const Model<T>& model, const Matrix<T>& x) {
  if (static_cast<std::size_t>(x.cols()) != model.config.input_width()) {
    throw DimensionError("encode: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.config.input_width()));
  }
  const auto layers = model.config.encoder_layers();
  Matrix<T> head = autodiff::mlp_eval(model.encoder, kEncoderPrefix, x, std::span<const LayerSpec>(layers));
  Encoding<T> out;
  if (model.config.variant == Variant::variational) {
    const auto m = static_cast<Eigen::Index>(model.config.latent_width());
    out.z = head.leftCols(m);
    out.log_var = head.middleCols(m, m).cwiseMax(T(kLogVarMin)).cwiseMin(T(kLogVarMax));
  } else {
    out.z = std::move(head);
  }
  return out;
}

template <typename T>
Matrix<T> representation(const Model<T>& model, const Matrix<T>& x) {
  return encode(model, x).z;
}

template <typename T>
Matrix<T> decode(const Model<T>& model, std::size_t decoder, const Matrix<T>& z) {
  if (decoder >= model.decoders.size()) throw ContractError("decoder index out of range");
  const auto layers = model.config.decoder_layers();
  return autodiff::mlp_eval(model.decoders[decoder], decoder_prefix(decoder), z, std::span<const LayerSpec>(layers));
}

template <typename T>
Matrix<T> standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<T> eps(rows, cols);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<T>(standard_normal(rng));
  return eps;
}

template <typename T>
Matrix<T> reparameterize_with(const Matrix<T>& mu, const Matrix<T>& log_var, const Matrix<T>& eps) {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols()) {
    throw DimensionError("reparameterize: mu, log variance and noise shapes differ");
  }
  const Matrix<T> lv = log_var.cwiseMax(T(kLogVarMin)).cwiseMin(T(kLogVarMax));
  return mu + ((T(0.5) * lv.array()).exp() * eps.array()).matrix();
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& log_var, Rng& rng) {
  return reparameterize_with(mu, log_var, standard_normal_matrix<T>(mu.rows(), mu.cols(), rng));
}

#define NBRENC_INSTANTIATE(T)                                                                 \
  template struct Model<T>;                                                                   \
  template Model<T> init_model<T>(const ModelConfig&, std::uint64_t);                         \
  template Matrix<T> corrupt<T>(const Matrix<T>&, double, Rng&);                              \
  template Encoding<T> encode<T>(const Model<T>&, const Matrix<T>&);                          \
  template Matrix<T> representation<T>(const Model<T>&, const Matrix<T>&);                    \
  template Matrix<T> decode<T>(const Model<T>&, std::size_t, const Matrix<T>&);               \
  template Matrix<T> standard_normal_matrix<T>(Eigen::Index, Eigen::Index, Rng&);             \
  template Matrix<T> reparameterize<T>(const Matrix<T>&, const Matrix<T>&, Rng&);             \
  template Matrix<T> reparameterize_with<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&);

NBRENC_INSTANTIATE(float)
NBRENC_INSTANTIATE(double)

#undef NBRENC_INSTANTIATE

}  // namespace nbrenc::models
