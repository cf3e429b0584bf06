#pragma once

// Training configuration, its JSON form and the ablation presets.
//
// JSON parsing is strict: a key the struct does not know is a ConfigError,
// missing keys keep their defaults.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cpgan/autodiff/adam.hpp"
#include "cpgan/error.hpp"
#include "cpgan/models/networks.hpp"
#include "cpgan/train/losses.hpp"
#include "cpgan/util/hash.hpp"

namespace cpgan::train {

struct RlfConfig {
  bool enabled = true;
  double threshold_phase1 = 0.2;
  double threshold_phase2 = 0.8;
  std::uint64_t beta_stream = 0xb37a;  // RNG stream for the per-sample blend weights
};

struct TrainConfig {
  std::string name = "full";  // reported as config_id by evaluation
  std::uint64_t seed = 1;
  std::size_t epochs_phase1 = 30;
  std::size_t epochs_phase2 = 30;
  std::size_t batch_size = 32;
  std::size_t clusters = 8;
  std::size_t dct_k = 64;
  bool train_encoder = true;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::string precision = "float32";  // or "float64"
  ad::AdamHyperparams adam;
  LossWeights weights;
  RlfConfig rlf;
  models::ModelConfig model;

  std::size_t total_epochs() const { return epochs_phase1 + epochs_phase2; }

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (clusters == 0) throw ConfigError("clusters must be positive");
    if (precision != "float32" && precision != "float64")
      throw ConfigError("precision must be float32 or float64, got " + precision);
    for (double t : {rlf.threshold_phase1, rlf.threshold_phase2})
      if (!(t >= 0 && t <= 1)) throw ConfigError("RLF thresholds must lie in [0, 1]");
    if (!(adam.learning_rate > 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
        !(adam.epsilon > 0))
      throw ConfigError("invalid Adam hyperparameters");
    weights.validate();
    model.validate();
    if (dct_k < model.image_size) throw ConfigError("dct_k must be at least image_size");
  }
};

}  // namespace cpgan::train

namespace cpgan::ad {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamHyperparams, learning_rate, beta1, beta2, epsilon)
}
namespace cpgan::models {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, image_size, channels, z_dim, c_dim, seed_size,
                                                gen_channels, enc_channels, disc_channels, disc_join_channels,
                                                init_gain, leaky_slope)
}

namespace cpgan::train {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, mse, perceptual, adversarial)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RlfConfig, enabled, threshold_phase1, threshold_phase2,
                                                beta_stream)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, name, seed, epochs_phase1, epochs_phase2,
                                                batch_size, clusters, dct_k, train_encoder, checkpoint_every,
                                                precision, adam, weights, rlf, model)

namespace detail {

// Every key of `given` must appear in `known` (the defaults-filled round trip).
inline void reject_unknown_keys(const nlohmann::json& given, const nlohmann::json& known,
                                const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!known.is_object() || !known.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    reject_unknown_keys(value, known.at(key), where);
  }
}

}  // namespace detail

/// Strict parse of a JSON fragment over the defaults.
template <typename T>
T strict_from_json(const nlohmann::json& j, const std::string& what) {
  try {
    if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
    T value = j.get<T>();
    detail::reject_unknown_keys(j, nlohmann::json(value), "");
    return value;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  auto c = strict_from_json<TrainConfig>(j, "train config");
  c.validate();
  return c;
}

/// Canonical text (sorted keys, compact) and its FNV-1a hash.
inline std::string canonical_json(const TrainConfig& c) { return nlohmann::json(c).dump(); }
inline std::uint64_t config_hash(const TrainConfig& c) { return util::fnv1a(canonical_json(c)); }

inline constexpr const char* kAblations[] = {"adv", "adv+mse", "adv+mse+percept", "full"};

/// Sets weights, RLF and name for one of the four ablation rows. The
/// weighted rows keep the default magnitudes and zero the absent terms.
inline void apply_ablation(TrainConfig& c, const std::string& name) {
  const LossWeights defaults;
  if (name == "adv") {
    c.weights = {0, 0, 1};
    c.rlf.enabled = false;
  } else if (name == "adv+mse") {
    c.weights = {defaults.mse, 0, defaults.adversarial};
    c.rlf.enabled = false;
  } else if (name == "adv+mse+percept") {
    c.weights = defaults;
    c.rlf.enabled = false;
  } else if (name == "full") {
    c.weights = defaults;
    c.rlf.enabled = true;
  } else {
    throw ConfigError("unknown ablation '" + name + "' (expected adv, adv+mse, adv+mse+percept or full)");
  }
  c.name = name;
}

}  // namespace cpgan::train
