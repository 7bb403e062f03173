#include "i2c/trainer/pipeline.hpp"

#include "i2c/errors.hpp"
#include "i2c/nn/checkpoint.hpp"
#include "i2c/text_io.hpp"

#include <json.hpp>

#include <fstream>

namespace i2c::trainer {

namespace fs = std::filesystem;

std::string checkpoint_name(const std::string& experiment, const std::string& phase, int episode) {
  return experiment + "-" + phase + "-" + std::to_string(episode) + ".ckpt";
}

namespace {

std::string overhead_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("nan");
}

std::string producer_id(const std::string& checkpoint_file) {
  return fs::path(checkpoint_file).stem().string();
}

void say(const RunSpec& spec, const std::string& line) {
  if (spec.log) *spec.log << "[" << spec.experiment << " seed " << spec.seed << "] " << line << '\n';
}

PhaseHooks progress_hooks(const RunSpec& spec, const std::string& phase) {
  PhaseHooks h;
  h.audit = spec.audit;
  if (spec.log) {
    h.on_interval = [&spec, phase](const IntervalMetrics& m, const Model&) {
      say(spec, phase + " episode " + std::to_string(m.episode) + " reward " +
                    format_double(m.reward_mean) + " overhead " + overhead_text(m.overhead));
    };
  }
  return h;
}

std::map<std::string, std::string> checkpoint_meta(const RunSpec& spec, const std::string& phase,
                                                   int episode) {
  return {{"experiment", spec.experiment},
          {"phase", phase},
          {"episode", std::to_string(episode)},
          {"mode", to_string(spec.mode)},
          {"env", envs::to_string(spec.env.kind)},
          {"seed", std::to_string(spec.seed)},
          {"phase1_fingerprint", spec.phase1_fingerprint}};
}

fs::path save_model(const RunSpec& spec, const Model& model, const std::string& phase, int episode,
                    RunResult& result) {
  const fs::path path = spec.out_dir / checkpoint_name(spec.experiment, phase, episode);
  nn::save_checkpoint(path, model.to_checkpoint(checkpoint_meta(spec, phase, episode)));
  result.checkpoints.push_back(path);
  return path;
}

ModelShape shape_for(const RunSpec& spec) {
  auto env = envs::make_environment(spec.env);
  return ModelShape::make(*env, spec.train, spec.mode);
}

Model train_phase_one(const RunSpec& spec, RunResult& result) {
  const ModelShape shape = shape_for(spec);
  const int episodes = spec.train.phase1_episodes;
  if (!spec.phase1_checkpoint.empty() && fs::exists(spec.phase1_checkpoint)) {
    const auto ckpt = nn::load_checkpoint(spec.phase1_checkpoint);
    const auto it = ckpt.metadata.find("phase1_fingerprint");
    if (it != ckpt.metadata.end() && it->second == spec.phase1_fingerprint) {
      say(spec, "reusing phase one from " + spec.phase1_checkpoint.string());
      for (const char* f : {"metrics-phase1.csv", "timing-phase1.csv"}) {
        const fs::path src = spec.phase1_checkpoint.parent_path() / f;
        if (fs::exists(src) && !fs::equivalent(src.parent_path(), spec.out_dir)) fs::copy_file(src, spec.out_dir / f, fs::copy_options::overwrite_existing);
      }
      return Model::from_checkpoint(ckpt, shape);
    }
    say(spec, "phase-one checkpoint fingerprint differs; retraining");
  }
  Model model = Model::create(shape, derive_seed(spec.seed, "phase1.init"));
  PhaseSpec ps;
  ps.name = "phase1";
  ps.gate = gate_for(spec.mode, spec.p_comm, true);
  ps.eta = 0.0;
  ps.message_dropout = spec.mode == Mode::CommReduction ? spec.train.message_dropout : 0.0;
  ps.episodes = episodes;
  say(spec, "phase one: " + std::to_string(episodes) + " episodes");
  result.phase1 = train_phase(model, spec.env, spec.train, ps, derive_seed(spec.seed, "phase1"),
                              progress_hooks(spec, "phase1"));
  const fs::path ckpt = save_model(spec, model, "phase1", episodes, result);
  write_metrics(spec.out_dir, "phase1", producer_id(ckpt.string()), metric_name(spec.env.kind),
                result.phase1);
  if (!spec.phase1_checkpoint.empty()) {
    const fs::path shared = spec.phase1_checkpoint.parent_path();
    fs::create_directories(shared);
    nn::save_checkpoint(spec.phase1_checkpoint,
                        model.to_checkpoint(checkpoint_meta(spec, "phase1", episodes)));
    if (fs::weakly_canonical(shared) != fs::weakly_canonical(spec.out_dir)) {
      for (const char* f : {"metrics-phase1.csv", "timing-phase1.csv"}) {
        fs::copy_file(spec.out_dir / f, shared / f, fs::copy_options::overwrite_existing);
      }
    }
  }
  return model;
}

causal::CausalDataset harvest(const RunSpec& spec, const Model& phase1) {
  auto env = envs::make_environment(spec.env);
  causal::CollectOptions co;
  co.episodes = spec.train.dataset_episodes;
  co.lambda = spec.train.lambda;
  co.seed = derive_seed(spec.seed, "dataset");
  co.id_encoding = phase1.shape.id_encoding;
  co.source = checkpoint_name(spec.experiment, "phase1", spec.train.phase1_episodes);
  if (spec.mode == Mode::CommReduction) {
    const ModelPolicy policy(phase1, gate_for(spec.mode, spec.p_comm, true));
    const MessageCriticActionValue critic(phase1);
    return causal::collect_message_dataset(policy, critic, *env, co);
  }
  const ModelPolicy policy(phase1, gate_for(Mode::NoComm, spec.p_comm, true));
  const CriticActionValue critic(phase1);
  return causal::collect_dataset(policy, critic, *env, co);
}

Model fresh_phase_two(const RunSpec& spec, std::uint64_t seed, const Model* with_prior) {
  Model m = Model::create(shape_for(spec), derive_seed(seed, "phase2.init"));
  if (with_prior) {
    m.prior_store = with_prior->prior_store;
    m.prior = comms::PriorNetwork::bind(m.prior_store, "prior", m.shape.obs_dim, m.shape.id_dim,
                                        m.shape.prior_hidden, m.shape.nonlinearity);
    m.prior_trained = with_prior->prior_trained;
  }
  return m;
}

PhaseSpec phase_two_spec(const RunSpec& spec, int episodes) {
  PhaseSpec ps;
  ps.name = "phase2";
  ps.gate = gate_for(spec.mode, spec.p_comm, false);
  ps.eta = spec.mode == Mode::I2cR ? 0.0 : spec.train.eta;
  if (spec.mode == Mode::FullComm || spec.mode == Mode::RandomComm) ps.eta = 0.0;
  ps.message_dropout = 0.0;
  ps.episodes = episodes;
  return ps;
}

void write_delta(const fs::path& path, const std::string& producer,
                 const causal::DeltaSelection& sel) {
  CsvTable t;
  t.comments = {"producer=" + producer, "chosen_percentile=" + format_double(sel.percentile),
                "chosen_delta=" + format_double(sel.delta)};
  t.header = {"percentile", "delta", "score"};
  for (const auto& [p, d] : sel.candidates) {
    const auto it = sel.scores.find(p);
    t.rows.push_back({format_double(p), format_double(d),
                      it == sel.scores.end() ? std::string("nan") : format_double(it->second)});
  }
  write_csv(path, t);
}

void write_prior_report(const fs::path& path, const PriorReport& r) {
  nlohmann::json j{{"train_size", r.train_size},
                   {"heldout_size", r.heldout_size},
                   {"initial_heldout_loss", r.initial_heldout_loss},
                   {"final_heldout_loss", r.final_heldout_loss},
                   {"heldout_accuracy", r.heldout_accuracy},
                   {"positive_fraction", r.positive_fraction},
                   {"single_class", r.single_class}};
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

void check_prior_frozen(const nn::ParameterStore& before, const nn::ParameterStore& after) {
  for (std::size_t e = 0; e < before.entry_count(); ++e) {
    if (before.entry(e).values != after.entry(e).values) {
      throw StateError("prior parameters changed during phase two");
    }
  }
}

}  // namespace

void write_metrics(const fs::path& dir, const std::string& phase, const std::string& producer,
                   const std::string& metric, const std::vector<IntervalMetrics>& rows) {
  CsvTable t;
  t.comments = {"producer=" + producer};
  t.header = {"episode", "reward_mean", "reward_std", metric, "overhead"};
  CsvTable timing;
  timing.comments = t.comments;
  timing.header = {"episode", "wall_seconds"};
  for (const auto& m : rows) {
    t.rows.push_back({std::to_string(m.episode), format_double(m.reward_mean),
                      format_double(m.reward_std), format_double(m.metric), overhead_text(m.overhead)});
    timing.rows.push_back({std::to_string(m.episode), format_double(m.wall_seconds)});
  }
  write_csv(dir / ("metrics-" + phase + ".csv"), t);
  write_csv(dir / ("timing-" + phase + ".csv"), timing);
}

void write_eval_summary(const fs::path& path, const std::string& producer, const EvalSummary& s) {
  CsvTable t;
  t.comments = {"producer=" + producer};
  t.header = {"episodes", "reward_mean", "reward_std", s.metric, "overhead"};
  t.rows.push_back({std::to_string(s.episodes), format_double(s.reward_mean),
                    format_double(s.reward_std), format_double(s.metric_mean),
                    overhead_text(s.overhead)});
  write_csv(path, t);
}

EvalOptions final_eval_options(const RunSpec& spec) {
  EvalOptions eo;
  eo.episodes = spec.train.final_eval_episodes;
  eo.seed = derive_seed(spec.seed, "final.eval");
  return eo;
}

EvalSummary short_phase_two(const RunSpec& spec, const causal::CausalDataset& labeled,
                            int episodes, std::uint64_t seed) {
  Model base = fresh_phase_two(spec, seed, nullptr);
  train_prior(base, labeled, spec.train.prior_epochs, spec.train.prior_batch, spec.train.lr_prior,
              derive_seed(seed, "prior"));
  Model m = fresh_phase_two(spec, seed, &base);
  const PhaseSpec ps = phase_two_spec(spec, episodes);
  TrainConfig quiet = spec.train;
  quiet.eval_interval = std::max(episodes, 1);
  train_phase(m, spec.env, quiet, ps, derive_seed(seed, "phase2"));
  EvalOptions eo;
  eo.episodes = spec.train.eval_episodes;
  eo.seed = derive_seed(seed, "grid.eval");
  return evaluate(m, spec.env, ps.gate, eo);
}

RunResult run_two_phase(const RunSpec& spec) {
  spec.env.validate();
  spec.train.validate();
  if (spec.mode == Mode::CommReduction && spec.env.kind != envs::EnvKind::TrafficJunction) {
    throw ConfigError("mode: comm-reduction requires the traffic-junction environment");
  }
  if (spec.mode == Mode::RandomComm && !(spec.p_comm >= 0.0 && spec.p_comm <= 1.0)) {
    throw ConfigError("p_comm: must lie in [0, 1]");
  }
  fs::create_directories(spec.out_dir);
  RunResult result;

  std::optional<Model> phase1;
  if (spec.mode == Mode::NoComm || uses_prior(spec.mode)) phase1 = train_phase_one(spec, result);

  if (spec.mode == Mode::NoComm) {
    result.final_checkpoint = spec.out_dir / checkpoint_name(spec.experiment, "phase1", spec.train.phase1_episodes);
    if (!fs::exists(result.final_checkpoint)) {
      nn::save_checkpoint(result.final_checkpoint,
                          phase1->to_checkpoint(checkpoint_meta(spec, "phase1", spec.train.phase1_episodes)));
    }
    const auto gate = gate_for(Mode::NoComm, spec.p_comm, false);
    envs::TrajectoryWriter traj(spec.out_dir / "trajectories.csv", producer_id(result.final_checkpoint.string()),
                                envs::to_string(spec.env.kind));
    envs::CommLogWriter comm(spec.out_dir / "comm_log.csv", producer_id(result.final_checkpoint.string()));
    auto eo = final_eval_options(spec);
    eo.trajectories = &traj;
    eo.comm_log = &comm;
    result.final_eval = evaluate(*phase1, spec.env, gate, eo);
    write_eval_summary(spec.out_dir / "eval.csv", producer_id(result.final_checkpoint.string()), *result.final_eval);
    return result;
  }

  std::optional<Model> prior_source;
  if (uses_prior(spec.mode)) {
    say(spec, "collecting causal effects over " + std::to_string(spec.train.dataset_episodes) + " episodes");
    auto dataset = harvest(spec, *phase1);
    if (dataset.empty()) throw StateError("phase one produced no causal-effect samples");
    const fs::path dataset_path = spec.out_dir / "dataset.csv";

    std::function<double(double)> validate;
    std::vector<double> candidates = spec.train.delta_percentiles;
    if (spec.train.delta_percentile > 0.0) {
      candidates = {spec.train.delta_percentile};
    } else if (candidates.size() > 1) {
      validate = [&](double delta) {
        const auto labeled = causal::label(dataset, delta);
        double score = 0.0;
        for (int g = 0; g < spec.train.grid_seeds; ++g) {
          const auto s = short_phase_two(spec, labeled, spec.train.grid_episodes,
                                         derive_seed(spec.seed, "grid." + std::to_string(g)));
          score += s.reward_mean;
        }
        say(spec, "delta " + format_double(delta) + " scored " + format_double(score / spec.train.grid_seeds));
        return score / spec.train.grid_seeds;
      };
    }
    result.delta = causal::select_delta(dataset, candidates, validate);
    dataset = causal::label(std::move(dataset), result.delta->delta);
    causal::save_dataset(dataset_path, dataset);
    write_delta(spec.out_dir / "delta.csv", dataset.source, *result.delta);

    Model prior_model = *phase1;
    result.prior = train_prior(prior_model, dataset, spec.train.prior_epochs, spec.train.prior_batch,
                               spec.train.lr_prior, derive_seed(spec.seed, "prior"));
    write_prior_report(spec.out_dir / "prior.json", *result.prior);
    say(spec, "prior trained: held-out accuracy " + format_double(result.prior->heldout_accuracy) +
                  ", positives " + format_double(result.prior->positive_fraction));
    if (result.prior->single_class) say(spec, "warning: every label has the same class");
    prior_source = std::move(prior_model);
  }

  const int episodes = spec.train.phase2_episodes;
  if (episodes == 0) {
    if (prior_source) {
      result.final_checkpoint = save_model(spec, *prior_source, "phase1-prior", spec.train.phase1_episodes, result);
    }
    return result;
  }

  Model model = fresh_phase_two(spec, spec.seed, prior_source ? &*prior_source : nullptr);
  const nn::ParameterStore prior_before = model.prior_store;
  const PhaseSpec ps = phase_two_spec(spec, episodes);
  say(spec, "phase two (" + to_string(spec.mode) + "): " + std::to_string(episodes) + " episodes");
  result.phase2 = train_phase(model, spec.env, spec.train, ps, derive_seed(spec.seed, "phase2"),
                              progress_hooks(spec, "phase2"));
  check_prior_frozen(prior_before, model.prior_store);
  result.final_checkpoint = save_model(spec, model, "phase2", episodes, result);
  const std::string producer = producer_id(result.final_checkpoint.string());
  write_metrics(spec.out_dir, "phase2", producer, metric_name(spec.env.kind), result.phase2);

  envs::TrajectoryWriter traj(spec.out_dir / "trajectories.csv", producer, envs::to_string(spec.env.kind));
  envs::CommLogWriter comm(spec.out_dir / "comm_log.csv", producer);
  auto eo = final_eval_options(spec);
  eo.trajectories = &traj;
  eo.comm_log = &comm;
  result.final_eval = evaluate(model, spec.env, ps.gate, eo);
  write_eval_summary(spec.out_dir / "eval.csv", producer, *result.final_eval);
  return result;
}

}  // namespace i2c::trainer
