#include "i2c/trainer/config.hpp"

#include "i2c/errors.hpp"

namespace i2c::trainer {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::I2c: return "i2c";
    case Mode::I2cR: return "i2c-r";
    case Mode::FullComm: return "fc";
    case Mode::RandomComm: return "rc";
    case Mode::NoComm: return "no-comm";
    case Mode::CommReduction: return "comm-reduction";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view name) {
  for (Mode m : {Mode::I2c, Mode::I2cR, Mode::FullComm, Mode::RandomComm, Mode::NoComm,
                 Mode::CommReduction}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("mode: unknown value '" + std::string(name) +
                    "' (expected i2c, i2c-r, fc, rc, no-comm or comm-reduction)");
}

bool uses_prior(Mode m) {
  return m == Mode::I2c || m == Mode::I2cR || m == Mode::CommReduction;
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("train." + field + ": " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(lr_critic > 0.0, "lr_critic", "must be positive");
  require(lr_policy > 0.0, "lr_policy", "must be positive");
  require(lr_prior > 0.0, "lr_prior", "must be positive");
  require(lambda > 0.0, "lambda", "must be positive");
  require(eta >= 0.0, "eta", "must be nonnegative");
  require(!delta_percentiles.empty(), "delta_percentiles", "needs at least one candidate");
  for (double p : delta_percentiles) {
    require(p > 0.0 && p < 100.0, "delta_percentiles", "candidates must lie in (0, 100)");
  }
  require(delta_percentile == 0.0 || (delta_percentile > 0.0 && delta_percentile < 100.0),
          "delta_percentile", "must be 0 (grid search) or lie in (0, 100)");
  require(tau > 0.0 && tau <= 1.0, "tau", "must lie in (0, 1]");
  require(buffer_capacity >= static_cast<std::size_t>(batch_size), "buffer_capacity",
          "must hold at least one batch");
  require(warmup_transitions >= batch_size, "warmup_transitions", "must be at least batch_size");
  require(update_every >= 1, "update_every", "must be at least 1");
  require(updates_per_round >= 1, "updates_per_round", "must be at least 1");
  require(grad_clip >= 0.0, "grad_clip", "must be nonnegative (0 disables clipping)");
  require(hidden >= 1, "hidden", "must be at least 1");
  require(encoder_hidden >= 1, "encoder_hidden", "must be at least 1");
  require(encoder_layers >= 1, "encoder_layers", "must be at least 1");
  require(prior_hidden >= 1, "prior_hidden", "must be at least 1");
  require(phase1_episodes >= 0, "phase1_episodes", "must be nonnegative");
  require(phase2_episodes >= 0, "phase2_episodes", "must be nonnegative");
  require(dataset_episodes >= 1, "dataset_episodes", "must be at least 1");
  require(prior_epochs >= 1, "prior_epochs", "must be at least 1");
  require(prior_batch >= 1, "prior_batch", "must be at least 1");
  require(grid_episodes >= 1, "grid_episodes", "must be at least 1");
  require(grid_seeds >= 1, "grid_seeds", "must be at least 1");
  require(message_dropout >= 0.0 && message_dropout <= 1.0, "message_dropout",
          "must lie in [0, 1]");
  require(eval_interval >= 1, "eval_interval", "must be at least 1");
  require(eval_episodes >= 1, "eval_episodes", "must be at least 1");
  require(final_eval_episodes >= 1, "final_eval_episodes", "must be at least 1");
}

TrainConfig desk_particle_config() {
  TrainConfig c;
  c.batch_size = 256;
  c.lr_critic = 1e-3;
  c.lr_policy = 1e-3;
  c.buffer_capacity = 200'000;
  c.warmup_transitions = 2000;
  c.update_every = 100;
  c.hidden = 64;
  c.encoder_hidden = 32;
  c.prior_hidden = 64;
  c.dataset_episodes = 500;
  c.grid_episodes = 1000;
  return c;
}

TrainConfig desk_traffic_config() {
  TrainConfig c;
  c.batch_size = 80;
  c.lr_critic = 7e-4;
  c.lr_policy = 7e-4;
  c.buffer_capacity = 50'000;
  c.warmup_transitions = 1000;
  c.update_every = 40;
  c.hidden = 64;
  c.encoder_hidden = 32;
  c.prior_hidden = 64;
  c.nonlinearity = nn::Nonlinearity::Tanh;
  c.delta_percentiles = {95.0};
  c.delta_percentile = 95.0;
  c.dataset_episodes = 300;
  return c;
}

}  // namespace i2c::trainer
