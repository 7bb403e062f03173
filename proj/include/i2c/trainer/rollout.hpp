#pragma once

#include "i2c/comms/comms.hpp"
#include "i2c/envs/environment.hpp"
#include "i2c/envs/trajectory.hpp"
#include "i2c/trainer/models.hpp"
#include "i2c/trainer/updates.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace i2c::trainer {

/// Gate used by a mode. Phase one never communicates except in
/// comm-reduction mode, where it trains the full-communication model.
comms::Gate gate_for(Mode mode, double p_comm, bool phase_one);

struct Decision {
  std::vector<comms::PriorBelief> beliefs;
  std::vector<comms::MessageBundle> bundles;
  std::vector<int> actions;
};

/// One request round followed by every live agent acting. `action_rng`
/// = nullptr selects greedy actions. Dead slots act 0.
Decision decide(const Model& model, const envs::JointObservation& obs, const comms::Gate& gate,
                Rng& gate_rng, Rng* action_rng);

/// Samples actions from the current policies without communication
/// logging; used when harvesting causal-effect data.
class ModelPolicy : public causal::JointPolicy {
 public:
  ModelPolicy(const Model& model, comms::Gate gate) : model_(model), gate_(gate) {}
  causal::JointAction sample(const envs::JointObservation& o, Rng& rng) const override;

 private:
  const Model& model_;
  comms::Gate gate_;
};

/// Name of the per-episode success/coverage statistic for an environment.
std::string metric_name(envs::EnvKind kind);

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  bool greedy = true;
  envs::TrajectoryWriter* trajectories = nullptr;
  envs::CommLogWriter* comm_log = nullptr;
  bool keep_records = false;
};

/// Reward per episode: final-step team reward (cooperative navigation),
/// mean per-step team reward (predator-prey) or summed team reward
/// (traffic junction). Metric per episode: occupied landmarks at the final
/// step, collisions per step, or success (no collision in the episode).
struct EvalSummary {
  int episodes = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double metric_mean = 0.0;
  std::string metric;
  std::optional<double> overhead;
  std::vector<double> rewards;
  std::vector<double> metrics;
  std::vector<comms::CommRecord> records;
};

EvalSummary evaluate(const Model& model, const envs::EnvConfig& env_config,
                     const comms::Gate& gate, const EvalOptions& options);

struct PhaseSpec {
  std::string name;
  comms::Gate gate;
  double eta = 0.0;
  double message_dropout = 0.0;
  int episodes = 0;
};

struct IntervalMetrics {
  int episode = 0;
  double reward_mean = 0.0;
  double reward_std = 0.0;
  double metric = 0.0;
  std::optional<double> overhead;
  double wall_seconds = 0.0;
};

struct PhaseHooks {
  std::function<void(const IntervalMetrics&, const Model&)> on_interval;
  bool audit = false;
};

/// Trains `model` in place for spec.episodes episodes. Every
/// config.eval_interval episodes the greedy policy is evaluated on a fixed
/// set of config.eval_episodes episodes.
std::vector<IntervalMetrics> train_phase(Model& model, const envs::EnvConfig& env_config,
                                         const TrainConfig& config, const PhaseSpec& spec,
                                         std::uint64_t seed, const PhaseHooks& hooks = {});

}  // namespace i2c::trainer
