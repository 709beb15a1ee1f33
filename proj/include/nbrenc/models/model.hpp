#pragma once

#include "nbrenc/autodiff/mlp.hpp"
#include "nbrenc/autodiff/param_store.hpp"
#include "nbrenc/matrix.hpp"
#include "nbrenc/random.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nbrenc::models {

enum class Variant { vanilla, denoising, variational };
enum class Objective { self, neighbor };
enum class LossKind { bce, mse };
// How the k neighbor targets of a sample are spread over the k decoders.
enum class AssignmentStrategy { typed, matched, greedy };

std::string to_string(Variant v);
std::string to_string(Objective o);
std::string to_string(LossKind l);
std::string to_string(AssignmentStrategy s);
std::string to_string(autodiff::Activation a);
// Throw ConfigError on unknown names.
Variant parse_variant(const std::string& s);
Objective parse_objective(const std::string& s);
LossKind parse_loss(const std::string& s);
AssignmentStrategy parse_assignment(const std::string& s);
autodiff::Activation parse_activation(const std::string& s);

struct ModelConfig {
  // Input width first, latent width last, e.g. {784, 256, 64}.
  std::vector<std::size_t> encoder_widths;
  std::size_t decoder_count = 1;
  Variant variant = Variant::vanilla;
  Objective objective = Objective::neighbor;
  double corruption_rate = 0.2;
  LossKind loss = LossKind::bce;
  double kl_weight = 1.0;
  AssignmentStrategy assignment = AssignmentStrategy::matched;
  autodiff::Activation hidden_activation = autodiff::Activation::relu;

  // Throws ConfigError describing the first inconsistency.
  void validate() const;

  std::size_t input_width() const { return encoder_widths.front(); }
  std::size_t latent_width() const { return encoder_widths.back(); }
  // The variational head has 2m outputs: mu then log variance.
  std::vector<autodiff::LayerSpec> encoder_layers() const;
  // Mirror of the encoder; sigmoid output for BCE, identity for MSE.
  std::vector<autodiff::LayerSpec> decoder_layers() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
// Strict: unknown keys and missing keys are ConfigErrors.
ModelConfig model_config_from_json(const nlohmann::json& j);

inline constexpr const char* kEncoderPrefix = "enc";
std::string decoder_prefix(std::size_t decoder);

template <typename T>
struct Model {
  ModelConfig config;
  autodiff::ParamStore<T> encoder;
  std::vector<autodiff::ParamStore<T>> decoders;

  // Every parameter (encoder and all decoders) by name, lexicographic.
  std::vector<std::pair<std::string, const Matrix<T>*>> all_parameters() const;
  Matrix<T>& parameter(const std::string& name);

  template <typename U>
  Model<U> cast() const {
    Model<U> out;
    out.config = config;
    out.encoder = encoder.template cast<U>();
    for (const auto& d : decoders) out.decoders.push_back(d.template cast<U>());
    return out;
  }

  bool same_parameters(const Model& other) const;
};

// Seeded Glorot-uniform initialization: encoder first, then decoders in order.
template <typename T>
Model<T> init_model(const ModelConfig& config, std::uint64_t seed);

// Masking noise: each element zeroed independently with probability `rate`.
template <typename T>
Matrix<T> corrupt(const Matrix<T>& x, double rate, Rng& rng);

template <typename T>
struct Encoding {
  Matrix<T> z;        // deterministic latent (mu for the variational variant)
  Matrix<T> log_var;  // variational only, clamped to [-10, 10]
};

template <typename T>
Encoding<T> encode(const Model<T>& model, const Matrix<T>& x);

// The representation used downstream: z, or mu for the variational variant.
template <typename T>
Matrix<T> representation(const Model<T>& model, const Matrix<T>& x);

// Decoder `j` applied to latent rows.
template <typename T>
Matrix<T> decode(const Model<T>& model, std::size_t decoder, const Matrix<T>& z);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Standard normal draws of the given shape.
template <typename T>
Matrix<T> standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// mu + exp(log_var / 2) * eps with log_var clamped to [-10, 10].
template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& log_var, Rng& rng);
template <typename T>
Matrix<T> reparameterize_with(const Matrix<T>& mu, const Matrix<T>& log_var, const Matrix<T>& eps);

}  // namespace nbrenc::models
