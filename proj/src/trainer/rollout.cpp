#include "i2c/trainer/rollout.hpp"

#include "i2c/errors.hpp"

#include <chrono>
#include <cmath>

namespace i2c::trainer {

comms::Gate gate_for(Mode mode, double p_comm, bool phase_one) {
  comms::Gate g;
  g.p_comm = p_comm;
  if (phase_one) {
    g.mode = mode == Mode::CommReduction ? comms::GateMode::Full : comms::GateMode::None;
    return g;
  }
  switch (mode) {
    case Mode::I2c:
    case Mode::I2cR: g.mode = comms::GateMode::Prior; break;
    case Mode::CommReduction: g.mode = comms::GateMode::BroadcastPrior; break;
    case Mode::FullComm: g.mode = comms::GateMode::Full; break;
    case Mode::RandomComm: g.mode = comms::GateMode::Random; break;
    case Mode::NoComm: g.mode = comms::GateMode::None; break;
  }
  return g;
}

Decision decide(const Model& model, const envs::JointObservation& obs, const comms::Gate& gate,
                Rng& gate_rng, Rng* action_rng) {
  Decision d;
  d.beliefs = comms::gate_beliefs(gate, &model.prior, &model.prior_store, obs,
                                  model.shape.id_encoding, gate_rng);
  d.bundles = comms::request_round(d.beliefs, obs, gate.threshold);
  d.actions.assign(static_cast<std::size_t>(obs.num_agents), 0);
  std::vector<int> live;
  for (int i = 0; i < obs.num_agents; ++i) {
    if (obs.is_alive(i)) live.push_back(i);
  }
  if (live.empty()) return d;
  nn::Matrix x(obs.obs_dim, static_cast<Eigen::Index>(live.size()));
  std::vector<const comms::MessageBundle*> ptrs;
  for (std::size_t c = 0; c < live.size(); ++c) {
    const auto o = obs.obs(live[c]);
    for (int k = 0; k < obs.obs_dim; ++k) x(k, static_cast<Eigen::Index>(c)) = o[static_cast<std::size_t>(k)];
    ptrs.push_back(&d.bundles[static_cast<std::size_t>(live[c])]);
  }
  const nn::Matrix z = model.policy.logits(model.policy_store, x, ptrs);
  if (action_rng == nullptr) {
    for (std::size_t c = 0; c < live.size(); ++c) {
      d.actions[static_cast<std::size_t>(live[c])] = greedy_index(z.col(static_cast<Eigen::Index>(c)));
    }
    return d;
  }
  const nn::Matrix p = softmax_columns(z);
  for (std::size_t c = 0; c < live.size(); ++c) {
    d.actions[static_cast<std::size_t>(live[c])] = sample_index(p.col(static_cast<Eigen::Index>(c)), *action_rng);
  }
  return d;
}

causal::JointAction ModelPolicy::sample(const envs::JointObservation& o, Rng& rng) const {
  return decide(model_, o, gate_, rng, &rng).actions;
}

std::string metric_name(envs::EnvKind kind) {
  switch (kind) {
    case envs::EnvKind::CooperativeNavigation: return "occupied";
    case envs::EnvKind::PredatorPrey: return "collisions";
    case envs::EnvKind::TrafficJunction: return "success";
  }
  return "metric";
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

}  // namespace

EvalSummary evaluate(const Model& model, const envs::EnvConfig& env_config,
                     const comms::Gate& gate, const EvalOptions& options) {
  if (options.episodes < 1) throw InputError("evaluation needs at least one episode");
  auto env = envs::make_environment(env_config);
  const auto kind = env_config.kind;
  EvalSummary s;
  s.episodes = options.episodes;
  s.metric = metric_name(kind);
  std::vector<comms::CommRecord> records;
  for (int ep = 0; ep < options.episodes; ++ep) {
    const std::string tag = std::to_string(ep);
    auto obs = env->reset(derive_seed(options.seed, "eval.episode." + tag));
    Rng gate_rng = make_rng(options.seed, "eval.gate." + tag);
    Rng action_rng = make_rng(options.seed, "eval.actions." + tag);
    double total = 0.0;
    double last = 0.0;
    int collisions = 0;
    int occupied = 0;
    int steps = 0;
    for (int t = 0; t < env->episode_length(); ++t) {
      const auto d = decide(model, obs, gate, gate_rng, options.greedy ? nullptr : &action_rng);
      auto rec = comms::make_comm_record(t, obs, d.bundles);
      if (kind == envs::EnvKind::TrafficJunction) {
        rec.cells.resize(rec.alive.size());
        for (int i = 0; i < obs.num_agents; ++i) {
          if (!obs.is_alive(i)) continue;
          const auto p = env->position(i);
          rec.cells[static_cast<std::size_t>(i)] = {static_cast<int>(p[1]), static_cast<int>(p[0])};
        }
      }
      if (options.comm_log) {
        for (const auto& b : d.beliefs) {
          const auto& bundle = d.bundles[static_cast<std::size_t>(b.observer)];
          bool asked = false;
          for (const auto& m : bundle) asked = asked || m.sender == b.target;
          options.comm_log->write({ep, t, b.observer, b.target, b.probability, asked});
        }
      }
      std::vector<std::array<double, 2>> pos;
      if (options.trajectories) {
        for (int i = 0; i < obs.num_agents; ++i) pos.push_back(env->position(i));
      }
      auto r = env->step(d.actions);
      if (options.trajectories) {
        for (int i = 0; i < obs.num_agents; ++i) {
          const auto k = static_cast<std::size_t>(i);
          options.trajectories->write({ep, t, i, obs.is_alive(i), pos[k][0], pos[k][1], d.actions[k],
                                       r.reward, r.info.collisions, rec.observed[k], rec.requested[k]});
        }
      }
      records.push_back(std::move(rec));
      total += r.reward;
      last = r.reward;
      collisions += r.info.collisions;
      occupied = r.info.occupied;
      ++steps;
      obs = std::move(r.observation);
      if (r.done) break;
    }
    double reward = total;
    double metric = 0.0;
    switch (kind) {
      case envs::EnvKind::CooperativeNavigation:
        reward = last;
        metric = occupied;
        break;
      case envs::EnvKind::PredatorPrey:
        reward = total / std::max(steps, 1);
        metric = static_cast<double>(collisions) / std::max(steps, 1);
        break;
      case envs::EnvKind::TrafficJunction:
        metric = collisions == 0 ? 1.0 : 0.0;
        break;
    }
    s.rewards.push_back(reward);
    s.metrics.push_back(metric);
  }
  std::tie(s.reward_mean, s.reward_std) = mean_std(s.rewards);
  s.metric_mean = mean_std(s.metrics).first;
  s.overhead = comms::overall_overhead(records);
  if (options.keep_records) s.records = std::move(records);
  return s;
}

std::vector<IntervalMetrics> train_phase(Model& model, const envs::EnvConfig& env_config,
                                         const TrainConfig& config, const PhaseSpec& spec,
                                         std::uint64_t seed, const PhaseHooks& hooks) {
  config.validate();
  auto env = envs::make_environment(env_config);
  const std::string p = spec.name + ".";
  Rng gate_rng = make_rng(seed, p + "gate");
  Rng action_rng = make_rng(seed, p + "actions");
  Rng buffer_rng = make_rng(seed, p + "buffer");
  Rng update_rng = make_rng(seed, p + "update");
  ReplayBuffer buffer(config.buffer_capacity);

  UpdateOptions opt;
  opt.gamma = config.gamma;
  opt.lambda = config.lambda;
  opt.eta = spec.eta;
  opt.tau = config.tau;
  opt.target_network = config.target_network;
  opt.lr_critic = config.lr_critic;
  opt.lr_policy = config.lr_policy;
  opt.grad_clip = config.grad_clip;
  opt.optimizer = config.optimizer;
  opt.audit = hooks.audit;

  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t eval_seed = derive_seed(seed, p + "eval");
  std::vector<IntervalMetrics> out;
  long long steps = 0;
  for (int ep = 0; ep < spec.episodes; ++ep) {
    auto obs = env->reset(derive_seed(seed, p + "episode." + std::to_string(ep)));
    for (int t = 0; t < env->episode_length(); ++t) {
      const auto d = decide(model, obs, spec.gate, gate_rng, &action_rng);
      auto r = env->step(d.actions);
      buffer.add({obs, d.actions, r.reward, r.observation});
      obs = std::move(r.observation);
      ++steps;
      if (steps % config.update_every == 0 &&
          buffer.size() >= static_cast<std::size_t>(config.warmup_transitions)) {
        for (int u = 0; u < config.updates_per_round; ++u) {
          const auto batch = prepare_batch(
              model, buffer.sample(static_cast<std::size_t>(config.batch_size), buffer_rng),
              spec.gate, spec.message_dropout, update_rng);
          update(model, batch, opt, update_rng);
        }
      }
      if (r.done) break;
    }
    if ((ep + 1) % config.eval_interval == 0 || ep + 1 == spec.episodes) {
      EvalOptions eo;
      eo.episodes = config.eval_episodes;
      eo.seed = eval_seed;
      const auto summary = evaluate(model, env_config, spec.gate, eo);
      IntervalMetrics m;
      m.episode = ep + 1;
      m.reward_mean = summary.reward_mean;
      m.reward_std = summary.reward_std;
      m.metric = summary.metric_mean;
      m.overhead = summary.overhead;
      m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.push_back(m);
      if (hooks.on_interval) hooks.on_interval(m, model);
    }
  }
  return out;
}

}  // namespace i2c::trainer
