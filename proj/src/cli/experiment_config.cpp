#include "i2c/cli/experiment_config.hpp"

#include "i2c/errors.hpp"
#include "i2c/rng.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace i2c::cli {

using nlohmann::json;

namespace {

/// Reads fields out of one JSON object and rejects whatever is left.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      const auto& v = j_.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(field(key) + ": has the wrong type");
    }
  }

  std::string text(const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    read(key, v);
    return v;
  }

  void mark(const std::string& key) { used_.insert(key); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.contains(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

template <typename E, typename F>
E parse_enum(Section& s, const std::string& key, E fallback, F&& from_string) {
  if (!s.has(key)) return fallback;
  const std::string v = s.text(key, "");
  try {
    return from_string(v);
  } catch (const ConfigError& e) {
    throw ConfigError(s.field(key) + ": " + e.what());
  }
}

nn::Nonlinearity nonlinearity_from(const std::string& v) {
  if (v == "leaky-relu") return nn::Nonlinearity::LeakyRelu;
  if (v == "tanh") return nn::Nonlinearity::Tanh;
  throw ConfigError("unknown nonlinearity '" + v + "' (expected leaky-relu or tanh)");
}

std::string nonlinearity_name(nn::Nonlinearity n) {
  return n == nn::Nonlinearity::Tanh ? "tanh" : "leaky-relu";
}

nn::OptimizerKind optimizer_from(const std::string& v) {
  if (v == "adam") return nn::OptimizerKind::Adam;
  if (v == "sgd") return nn::OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + v + "' (expected adam or sgd)");
}

envs::EnvConfig parse_env(const json& j) {
  Section s(j, "env");
  if (!s.has("kind")) throw ConfigError("env.kind: missing required field");
  const auto kind = parse_enum(s, "kind", envs::EnvKind::CooperativeNavigation, envs::env_kind_from_string);
  const auto tmode = parse_enum(s, "traffic_mode", envs::TrafficMode::Medium, envs::traffic_mode_from_string);
  envs::EnvConfig c;
  switch (kind) {
    case envs::EnvKind::CooperativeNavigation: c = envs::EnvConfig::cooperative_navigation(); break;
    case envs::EnvKind::PredatorPrey: c = envs::EnvConfig::predator_prey(); break;
    case envs::EnvKind::TrafficJunction:
      c = tmode == envs::TrafficMode::Hard ? envs::EnvConfig::traffic_hard() : envs::EnvConfig::traffic_medium();
      break;
  }
  s.read("agents", c.agents);
  s.read("targets", c.targets);
  s.read("agent_size", c.agent_size);
  s.read("target_size", c.target_size);
  s.read("agent_accel", c.agent_accel);
  s.read("target_accel", c.target_accel);
  s.read("collision_penalty", c.collision_penalty);
  s.read("neighbors", c.neighbors);
  s.read("episode_length", c.episode_length);
  s.read("arena_half_width", c.arena_half_width);
  s.read("spawn_half_width", c.spawn_half_width);
  s.read("prey_area_half_width", c.prey_area_half_width);
  s.read("damping", c.damping);
  s.read("dt", c.dt);
  s.read("grid_size", c.grid_size);
  s.read("p_arrive", c.p_arrive);
  s.read("time_penalty", c.time_penalty);
  s.finish();
  c.validate();
  return c;
}

trainer::TrainConfig parse_train(const json& j, envs::EnvKind kind, std::string& preset) {
  Section s(j, "train");
  preset = s.text("preset", "paper");
  trainer::TrainConfig c;
  if (preset == "desk") {
    c = kind == envs::EnvKind::TrafficJunction ? trainer::desk_traffic_config()
                                               : trainer::desk_particle_config();
  } else if (preset == "paper") {
    if (kind == envs::EnvKind::TrafficJunction) {
      c.batch_size = 40;
      c.lr_critic = 7e-4;
      c.lr_policy = 7e-4;
      c.nonlinearity = nn::Nonlinearity::Tanh;
      c.delta_percentiles = {95.0};
      c.delta_percentile = 95.0;
    }
  } else {
    throw ConfigError("train.preset: unknown value '" + preset + "' (expected paper or desk)");
  }
  s.read("gamma", c.gamma);
  s.read("batch_size", c.batch_size);
  s.read("lr_critic", c.lr_critic);
  s.read("lr_policy", c.lr_policy);
  s.read("lr_prior", c.lr_prior);
  s.read("lambda", c.lambda);
  s.read("eta", c.eta);
  s.read("delta_percentiles", c.delta_percentiles);
  s.read("delta_percentile", c.delta_percentile);
  s.read("tau", c.tau);
  s.read("target_network", c.target_network);
  s.read("buffer_capacity", c.buffer_capacity);
  s.read("warmup_transitions", c.warmup_transitions);
  s.read("update_every", c.update_every);
  s.read("updates_per_round", c.updates_per_round);
  s.read("grad_clip", c.grad_clip);
  s.read("hidden", c.hidden);
  s.read("encoder_hidden", c.encoder_hidden);
  s.read("encoder_layers", c.encoder_layers);
  s.read("prior_hidden", c.prior_hidden);
  c.nonlinearity = parse_enum(s, "nonlinearity", c.nonlinearity, nonlinearity_from);
  c.id_encoding = parse_enum(s, "id_encoding", c.id_encoding, comms::id_encoding_from_string);
  c.optimizer.kind = parse_enum(s, "optimizer", c.optimizer.kind, optimizer_from);
  s.read("adam_beta1", c.optimizer.beta1);
  s.read("adam_beta2", c.optimizer.beta2);
  s.read("adam_epsilon", c.optimizer.epsilon);
  s.read("phase1_episodes", c.phase1_episodes);
  s.read("phase2_episodes", c.phase2_episodes);
  s.read("dataset_episodes", c.dataset_episodes);
  s.read("prior_epochs", c.prior_epochs);
  s.read("prior_batch", c.prior_batch);
  s.read("grid_episodes", c.grid_episodes);
  s.read("grid_seeds", c.grid_seeds);
  s.read("message_dropout", c.message_dropout);
  s.read("eval_interval", c.eval_interval);
  s.read("eval_episodes", c.eval_episodes);
  s.read("final_eval_episodes", c.final_eval_episodes);
  s.finish();
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  Section s(j, "");
  ExperimentConfig c;
  s.read("experiment", c.experiment);
  if (c.experiment.empty() || c.experiment.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("experiment: must be a nonempty name without path separators");
  }
  c.mode = parse_enum(s, "mode", c.mode, trainer::mode_from_string);
  if (c.mode == trainer::Mode::RandomComm && !s.has("p_comm")) {
    throw ConfigError("p_comm: required when mode is rc");
  }
  s.read("p_comm", c.p_comm);
  if (!(c.p_comm >= 0.0 && c.p_comm <= 1.0)) throw ConfigError("p_comm: must lie in [0, 1]");
  s.read("seeds", c.seeds);
  if (c.seeds.empty()) throw ConfigError("seeds: needs at least one seed");
  s.read("out_dir", c.out_dir);
  s.read("phase1_dir", c.phase1_dir);
  if (!s.has("env")) throw ConfigError("env: missing required section");
  s.mark("env");
  c.env = parse_env(j.at("env"));
  s.mark("train");
  c.train = parse_train(j.contains("train") ? j.at("train") : json::object(), c.env.kind, c.train_preset);
  s.finish();
  if (c.mode == trainer::Mode::CommReduction && c.env.kind != envs::EnvKind::TrafficJunction) {
    throw ConfigError("mode: comm-reduction requires env.kind traffic-junction");
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment(j);
}

json to_json(const ExperimentConfig& c) {
  const auto& e = c.env;
  json env{{"kind", envs::to_string(e.kind)},
           {"traffic_mode", envs::to_string(e.traffic_mode)},
           {"agents", e.agents},
           {"targets", e.targets},
           {"agent_size", e.agent_size},
           {"target_size", e.target_size},
           {"agent_accel", e.agent_accel},
           {"target_accel", e.target_accel},
           {"collision_penalty", e.collision_penalty},
           {"neighbors", e.neighbors},
           {"episode_length", e.episode_length},
           {"arena_half_width", e.arena_half_width},
           {"spawn_half_width", e.spawn_half_width},
           {"prey_area_half_width", e.prey_area_half_width},
           {"damping", e.damping},
           {"dt", e.dt},
           {"grid_size", e.grid_size},
           {"p_arrive", e.p_arrive},
           {"time_penalty", e.time_penalty}};
  const auto& t = c.train;
  json train{{"preset", c.train_preset},
             {"gamma", t.gamma},
             {"batch_size", t.batch_size},
             {"lr_critic", t.lr_critic},
             {"lr_policy", t.lr_policy},
             {"lr_prior", t.lr_prior},
             {"lambda", t.lambda},
             {"eta", t.eta},
             {"delta_percentiles", t.delta_percentiles},
             {"delta_percentile", t.delta_percentile},
             {"tau", t.tau},
             {"target_network", t.target_network},
             {"buffer_capacity", t.buffer_capacity},
             {"warmup_transitions", t.warmup_transitions},
             {"update_every", t.update_every},
             {"updates_per_round", t.updates_per_round},
             {"grad_clip", t.grad_clip},
             {"hidden", t.hidden},
             {"encoder_hidden", t.encoder_hidden},
             {"encoder_layers", t.encoder_layers},
             {"prior_hidden", t.prior_hidden},
             {"nonlinearity", nonlinearity_name(t.nonlinearity)},
             {"id_encoding", comms::to_string(t.id_encoding)},
             {"optimizer", t.optimizer.kind == nn::OptimizerKind::Sgd ? "sgd" : "adam"},
             {"adam_beta1", t.optimizer.beta1},
             {"adam_beta2", t.optimizer.beta2},
             {"adam_epsilon", t.optimizer.epsilon},
             {"phase1_episodes", t.phase1_episodes},
             {"phase2_episodes", t.phase2_episodes},
             {"dataset_episodes", t.dataset_episodes},
             {"prior_epochs", t.prior_epochs},
             {"prior_batch", t.prior_batch},
             {"grid_episodes", t.grid_episodes},
             {"grid_seeds", t.grid_seeds},
             {"message_dropout", t.message_dropout},
             {"eval_interval", t.eval_interval},
             {"eval_episodes", t.eval_episodes},
             {"final_eval_episodes", t.final_eval_episodes}};
  return json{{"experiment", c.experiment},
              {"mode", trainer::to_string(c.mode)},
              {"p_comm", c.p_comm},
              {"seeds", c.seeds},
              {"out_dir", c.out_dir},
              {"phase1_dir", c.phase1_dir},
              {"env", env},
              {"train", train}};
}

void save_resolved(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json(c).dump(2) << '\n';
}

std::string phase1_fingerprint(const ExperimentConfig& c, std::uint64_t seed) {
  json j = to_json(c);
  auto& t = j["train"];
  for (const char* k : {"preset", "eta", "phase2_episodes", "delta_percentiles", "delta_percentile",
                        "dataset_episodes", "prior_epochs", "prior_batch", "lr_prior",
                        "grid_episodes", "grid_seeds", "final_eval_episodes"}) {
    t.erase(k);
  }
  const bool message_critic = c.mode == trainer::Mode::CommReduction;
  const json key{{"env", j["env"]}, {"train", t}, {"seed", seed}, {"message_critic", message_critic}};
  std::ostringstream hex;
  hex << std::hex << derive_seed(seed, key.dump());
  return hex.str();
}

}  // namespace i2c::cli
