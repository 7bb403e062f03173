#pragma once

#include "i2c/envs/environment.hpp"
#include "i2c/trainer/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace i2c::cli {

/// One experiment file. Schema (JSON; unknown keys are rejected):
///
///     {
///       "experiment": "coop3-i2c",
///       "mode": "i2c" | "i2c-r" | "fc" | "rc" | "no-comm" | "comm-reduction",
///       "p_comm": 0.5,                  required for rc
///       "seeds": [0, 1, 2],
///       "out_dir": "runs/coop3-i2c",
///       "phase1_dir": "runs/coop3-phase1",   optional, shares phase one
///       "env":   { "kind": "coop-nav" | "predator-prey" | "traffic-junction",
///                  "traffic_mode": "medium" | "hard", ...EnvConfig fields },
///       "train": { "preset": "paper" | "desk", ...TrainConfig fields }
///     }
///
/// `env.kind` selects the preset the remaining env fields override;
/// `train.preset` does the same for training settings.
struct ExperimentConfig {
  std::string experiment = "experiment";
  trainer::Mode mode = trainer::Mode::I2c;
  double p_comm = 0.5;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_dir = "runs";
  std::string phase1_dir;
  envs::EnvConfig env;
  std::string train_preset = "paper";
  trainer::TrainConfig train;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError with a "<section>.<field>: ..." message.
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
/// Every field written out, so the result re-parses to the same config.
nlohmann::json to_json(const ExperimentConfig& c);
void save_resolved(const std::filesystem::path& path, const ExperimentConfig& c);

/// Identifies everything phase one depends on for one seed.
std::string phase1_fingerprint(const ExperimentConfig& c, std::uint64_t seed);

}  // namespace i2c::cli
