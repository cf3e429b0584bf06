#pragma once

// Run configuration read by the command-line tool: one JSON document holding
// the dataset, training and evaluation parameters. Keys missing from the file
// keep their defaults; unknown keys are rejected.
//
//   {
//     "seed": 1,                 seeds synthesis, training and evaluation
//     "out": "out",              output directory
//     "count": 2000,             samples rendered by `synth`
//     "synthesis": {...},        data::SynthConfig
//     "train": {...},            train::TrainConfig without "seed"
//     "eval": {"n_samples": 512, "histogram_bins": 256}
//   }

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cpgan/data/dataset.hpp"
#include "cpgan/train/config.hpp"

namespace cpgan::cli {

struct EvalConfig {
  std::size_t n_samples = 512;
  std::size_t histogram_bins = 256;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t count = 2000;
  data::SynthConfig synthesis;
  train::TrainConfig train;
  EvalConfig eval;

  void validate() const {
    if (count == 0) throw ConfigError("count must be positive");
    if (synthesis.image_size == 0 || synthesis.pose_bins == 0 || synthesis.supersample == 0)
      throw ConfigError("synthesis: image_size, pose_bins and supersample must be positive");
    if (synthesis.image_size != train.model.image_size)
      throw ConfigError("synthesis.image_size and train.model.image_size differ");
    if (eval.n_samples == 0) throw ConfigError("eval.n_samples must be positive");
    if (eval.histogram_bins == 0 || eval.histogram_bins > 256)
      throw ConfigError("eval.histogram_bins must be in [1, 256]");
    train.validate();
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, n_samples, histogram_bins)

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json train = c.train;
  train.erase("seed");
  return {{"seed", c.seed},   {"out", c.out},   {"count", c.count}, {"synthesis", c.synthesis},
          {"train", train}, {"eval", c.eval}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out") c.out = value.get<std::string>();
      else if (key == "count") c.count = value.get<std::size_t>();
      else if (key == "synthesis") c.synthesis = train::strict_from_json<data::SynthConfig>(value, "synthesis");
      else if (key == "eval") c.eval = train::strict_from_json<EvalConfig>(value, "eval");
      else if (key == "train") {
        if (value.is_object() && value.contains("seed"))
          throw ConfigError("train.seed is not accepted; set the top-level \"seed\"");
        c.train = train::strict_from_json<train::TrainConfig>(value, "train");
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("run config '" + key + "': " + e.what());
    }
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = data::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline std::uint64_t run_config_hash(const RunConfig& c) { return util::fnv1a(to_json(c).dump()); }

}  // namespace cpgan::cli
