#pragma once

#include "i2c/comms/comms.hpp"
#include "i2c/nn/layers.hpp"
#include "i2c/nn/optimizer.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace i2c::trainer {

/// Communication variant. Every variant shares the same code path and
/// differs only in the gate and the regularizer weight:
///   I2c            prior gate, eta from config
///   I2cR           prior gate, eta = 0
///   FullComm       every observed agent is asked
///   RandomComm     each observed agent is asked with probability p_comm
///   NoComm         nobody is asked (identical to the phase-one model)
///   CommReduction  traffic junction: broadcast request gated by a prior
///                  learned from the message causal effect
enum class Mode { I2c, I2cR, FullComm, RandomComm, NoComm, CommReduction };

std::string to_string(Mode m);
Mode mode_from_string(std::string_view name);
/// Whether the mode trains a prior (and so needs phase one).
bool uses_prior(Mode m);

struct TrainConfig {
  double gamma = 0.95;
  int batch_size = 800;
  double lr_critic = 1e-2;
  double lr_policy = 1e-2;
  double lr_prior = 1e-3;
  double lambda = 10.0;
  double eta = 1e-2;
  std::vector<double> delta_percentiles{90.0, 80.0, 70.0};
  /// Used as-is when > 0; otherwise delta is chosen by grid search.
  double delta_percentile = 0.0;
  double tau = 0.01;
  bool target_network = true;
  std::size_t buffer_capacity = 1'000'000;
  int warmup_transitions = 1000;
  /// Environment steps between update rounds.
  int update_every = 100;
  /// Gradient steps per update round.
  int updates_per_round = 1;
  double grad_clip = 0.5;

  int hidden = 128;
  int encoder_hidden = 128;
  int encoder_layers = 2;
  int prior_hidden = 128;
  nn::Nonlinearity nonlinearity = nn::Nonlinearity::LeakyRelu;
  comms::IdEncoding id_encoding = comms::IdEncoding::FovSlot;
  nn::OptimizerConfig optimizer{};

  int phase1_episodes = 30000;
  int phase2_episodes = 30000;
  int dataset_episodes = 5000;
  int prior_epochs = 20;
  int prior_batch = 256;
  /// Episodes per short phase-two run when grid-searching delta.
  int grid_episodes = 2000;
  int grid_seeds = 3;
  /// Probability that a teammate's encoding is replaced by the absent
  /// placeholder when training the message-aware critic.
  double message_dropout = 0.5;

  int eval_interval = 1000;
  int eval_episodes = 20;
  int final_eval_episodes = 100;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Desk-scale defaults sized for a single CPU core.
TrainConfig desk_particle_config();
TrainConfig desk_traffic_config();

}  // namespace i2c::trainer
