#include "i2c/cli/commands.hpp"

#include "i2c/causal/dataset.hpp"
#include "i2c/cli/export.hpp"
#include "i2c/errors.hpp"
#include "i2c/nn/checkpoint.hpp"
#include "i2c/text_io.hpp"
#include "i2c/trainer/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

namespace i2c::cli {

namespace fs = std::filesystem;

std::string resolve_out_dir(const ExperimentConfig& c, const std::optional<std::string>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("I2C_OUT_DIR"); env && *env) {
    return (fs::path(env) / c.experiment).string();
  }
  return c.out_dir;
}

int resolve_threads(const std::optional<int>& flag) {
  int threads = 1;
  if (const char* env = std::getenv("I2C_THREADS"); env && *env) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("I2C_THREADS: not an integer");
    }
  }
  if (flag) threads = *flag;
  if (threads < 1) throw ConfigError("threads: must be at least 1");
  return threads;
}

namespace {

std::string text_or_nan(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("nan");
}

trainer::RunSpec run_spec(const ExperimentConfig& c, std::uint64_t seed, const fs::path& dir) {
  trainer::RunSpec s;
  s.experiment = c.experiment;
  s.env = c.env;
  s.train = c.train;
  s.mode = c.mode;
  s.p_comm = c.p_comm;
  s.seed = seed;
  s.out_dir = dir;
  s.phase1_fingerprint = phase1_fingerprint(c, seed);
  if (!c.phase1_dir.empty()) {
    s.phase1_checkpoint = fs::path(c.phase1_dir) / ("seed-" + std::to_string(seed)) / "phase1.ckpt";
  }
  return s;
}

// Runs job(k) for k in [0, n) on up to `threads` workers. The first
// exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(threads, static_cast<int>(n)); ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          job(k);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

int cmd_train(const TrainCommand& cmd, std::ostream& out, std::ostream& log) {
  ExperimentConfig c = load_experiment(cmd.config);
  if (cmd.seed) c.seeds = {*cmd.seed};
  c.out_dir = resolve_out_dir(c, cmd.out);
  const int threads = resolve_threads(cmd.threads);
  const fs::path root(c.out_dir);
  fs::create_directories(root);
  save_resolved(root / "config.resolved.json", c);
  if (!(load_experiment(root / "config.resolved.json") == c)) {
    throw StateError("resolved config does not re-parse to the same configuration");
  }

  std::vector<trainer::RunResult> results(c.seeds.size());
  parallel_for(c.seeds.size(), threads, [&](std::size_t k) {
    auto spec = run_spec(c, c.seeds[k], root / ("seed-" + std::to_string(c.seeds[k])));
    spec.audit = cmd.audit;
    spec.log = (cmd.quiet || threads > 1) ? nullptr : &log;
    results[k] = trainer::run_two_phase(spec);
  });

  CsvTable summary;
  summary.comments = {"producer=" + c.experiment};
  summary.header = {"seed", "reward_mean", "reward_std", trainer::metric_name(c.env.kind), "overhead"};
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& e = results[k].final_eval;
    if (!e) continue;
    summary.rows.push_back({std::to_string(c.seeds[k]), format_double(e->reward_mean),
                            format_double(e->reward_std), format_double(e->metric_mean),
                            text_or_nan(e->overhead)});
    out << c.experiment << " seed " << c.seeds[k] << ": reward " << format_double(e->reward_mean)
        << " +- " << format_double(e->reward_std) << ", " << e->metric << " "
        << format_double(e->metric_mean) << ", overhead " << text_or_nan(e->overhead) << '\n';
  }
  write_csv(root / "summary.csv", summary);
  return 0;
}

int cmd_eval(const EvalCommand& cmd, std::ostream& out) {
  if (cmd.runs < 1) throw InputError("runs: must be at least 1");
  const ExperimentConfig c = load_experiment(cmd.config);
  const auto ckpt = nn::load_checkpoint(cmd.checkpoint);
  auto env = envs::make_environment(c.env);
  const auto shape = trainer::ModelShape::make(*env, c.train, c.mode);
  const auto model = trainer::Model::from_checkpoint(ckpt, shape);
  const auto phase_it = ckpt.metadata.find("phase");
  const bool phase_one = phase_it != ckpt.metadata.end() && phase_it->second.rfind("phase1", 0) == 0;
  const auto gate = trainer::gate_for(c.mode, c.p_comm, phase_one);
  if ((gate.mode == comms::GateMode::Prior || gate.mode == comms::GateMode::BroadcastPrior) &&
      !model.prior_trained) {
    throw ConfigError("checkpoint has no trained prior for mode " + trainer::to_string(c.mode));
  }
  trainer::EvalOptions eo;
  eo.episodes = cmd.runs;
  eo.seed = cmd.seed;
  const auto s = trainer::evaluate(model, c.env, gate, eo);
  out << "episodes " << s.episodes << "\nreward " << format_double(s.reward_mean) << " +- "
      << format_double(s.reward_std) << '\n'
      << s.metric << " " << format_double(s.metric_mean) << "\noverhead "
      << text_or_nan(s.overhead) << '\n';
  const fs::path file = cmd.out ? fs::path(*cmd.out) : fs::path(cmd.checkpoint).replace_extension(".eval.csv");
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  trainer::write_eval_summary(file, fs::path(cmd.checkpoint).stem().string(), s);
  return 0;
}

int cmd_export(const fs::path& run_dir, const std::string& artifact,
               const std::optional<fs::path>& out_file, std::ostream& out) {
  const fs::path target = out_file ? *out_file : run_dir / (artifact + ".csv");
  out << export_artifact(run_dir, artifact, target).string() << '\n';
  return 0;
}

int cmd_dataset(const std::string& action, const fs::path& file,
                const std::optional<fs::path>& out_file, std::ostream& out) {
  const auto d = causal::load_dataset(file);
  if (action == "inspect") {
    out << "samples " << d.size() << "\nsource " << d.source << "\nenv " << d.env << "\nlambda "
        << format_double(d.lambda) << "\ndelta " << (d.delta ? format_double(*d.delta) : "unset")
        << "\nid_encoding " << comms::to_string(d.id_encoding) << '\n';
    if (!d.empty()) {
      std::vector<double> e;
      for (const auto& s : d.samples) e.push_back(s.effect);
      out << "effect_min " << format_double(*std::min_element(e.begin(), e.end())) << '\n';
      for (double p : {50.0, 70.0, 80.0, 90.0}) {
        out << "effect_p" << static_cast<int>(p) << " " << format_double(causal::percentile(e, p)) << '\n';
      }
      out << "effect_max " << format_double(*std::max_element(e.begin(), e.end())) << '\n'
          << "positive_fraction " << format_double(causal::positive_fraction(d)) << '\n';
    }
    return 0;
  }
  if (action == "dump") {
    if (out_file) {
      causal::save_dataset(*out_file, d);
      out << out_file->string() << '\n';
    } else {
      out << "observer,target,target_slot,effect,label\n";
      for (const auto& s : d.samples) {
        out << s.observer << ',' << s.target << ',' << s.target_slot << ',' << format_double(s.effect)
            << ',' << s.label << '\n';
      }
    }
    return 0;
  }
  throw InputError("dataset: unknown action '" + action + "' (expected dump or inspect)");
}

int cmd_delta_sweep(const DeltaSweepCommand& cmd, std::ostream& out, std::ostream& log) {
  ExperimentConfig c = load_experiment(cmd.config);
  if (!trainer::uses_prior(c.mode)) throw ConfigError("mode: delta-sweep needs a prior-based mode");
  if (cmd.seed) c.seeds = {*cmd.seed};
  c.out_dir = resolve_out_dir(c, cmd.out);
  const int threads = resolve_threads(cmd.threads);
  const fs::path root(c.out_dir);
  fs::create_directories(root);
  save_resolved(root / "config.resolved.json", c);

  struct Row {
    std::uint64_t seed;
    double percentile, delta, positives, reward, reward_std;
    std::optional<double> overhead;
  };
  std::vector<std::vector<Row>> rows(c.seeds.size());
  parallel_for(c.seeds.size(), threads, [&](std::size_t k) {
    const std::uint64_t seed = c.seeds[k];
    auto spec = run_spec(c, seed, root / ("seed-" + std::to_string(seed)));
    spec.log = (cmd.quiet || threads > 1) ? nullptr : &log;
    spec.train.phase2_episodes = 0;
    spec.train.delta_percentile = cmd.percentiles.front();
    trainer::run_two_phase(spec);
    const auto dataset = causal::load_dataset(spec.out_dir / "dataset.csv");
    const auto deltas = causal::percentile_deltas(dataset, cmd.percentiles);
    for (double p : cmd.percentiles) {
      const auto labeled = causal::label(dataset, deltas.at(p));
      auto s = trainer::short_phase_two(spec, labeled, c.train.grid_episodes,
                                        derive_seed(seed, "sweep"));
      rows[k].push_back({seed, p, deltas.at(p), causal::positive_fraction(labeled), s.reward_mean,
                         s.reward_std, s.overhead});
      if (spec.log) {
        *spec.log << "[" << c.experiment << " seed " << seed << "] percentile " << format_double(p)
                  << " reward " << format_double(s.reward_mean) << " overhead "
                  << text_or_nan(s.overhead) << '\n';
      }
    }
  });

  CsvTable t;
  t.comments = {"producer=" + c.experiment};
  t.header = {"seed", "percentile", "delta", "positive_fraction", "reward_mean", "reward_std", "overhead"};
  for (const auto& per_seed : rows) {
    for (const auto& r : per_seed) {
      t.rows.push_back({std::to_string(r.seed), format_double(r.percentile), format_double(r.delta),
                        format_double(r.positives), format_double(r.reward), format_double(r.reward_std),
                        text_or_nan(r.overhead)});
      out << "seed " << r.seed << " percentile " << format_double(r.percentile) << " delta "
          << format_double(r.delta) << " reward " << format_double(r.reward) << " overhead "
          << text_or_nan(r.overhead) << '\n';
    }
  }
  write_csv(root / "delta_sweep.csv", t);
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"I2C multi-agent communication workbench"};
  app.require_subcommand(1);

  TrainCommand train;
  std::uint64_t train_seed = 0;
  std::string train_out;
  int train_threads = 0;
  auto* t = app.add_subcommand("train", "Train every seed of an experiment");
  t->add_option("--config", train.config, "Experiment JSON")->required();
  auto* t_seed = t->add_option("--seed", train_seed, "Run only this seed");
  auto* t_out = t->add_option("--out", train_out, "Output directory");
  auto* t_threads = t->add_option("--threads", train_threads, "Seeds trained in parallel");
  t->add_flag("--audit-gradients", train.audit, "Finite-difference check of every update");
  t->add_flag("--quiet", train.quiet, "No progress lines");

  EvalCommand eval;
  std::string eval_out;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with greedy actions");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--config", eval.config, "Experiment JSON the checkpoint was trained with")->required();
  e->add_option("--runs", eval.runs, "Test episodes")->capture_default_str();
  e->add_option("--seed", eval.seed, "Evaluation seed")->capture_default_str();
  auto* e_out = e->add_option("--out", eval_out, "Summary file");

  std::string run_dir;
  std::string artifact;
  std::string export_out;
  auto* x = app.add_subcommand("export", "Plot-ready tables from a run directory");
  x->add_option("run_dir", run_dir, "Run directory")->required();
  x->add_option("artifact", artifact, "overhead-curve | overhead-grid | learning-curve | trajectories")
      ->required()
      ->check(CLI::IsMember({"overhead-curve", "overhead-grid", "learning-curve", "trajectories"}));
  auto* x_out = x->add_option("--out", export_out, "Output file");

  std::string ds_action;
  std::string ds_file;
  std::string ds_out;
  auto* d = app.add_subcommand("dataset", "Dump or inspect a causal-effect dataset");
  d->add_option("action", ds_action, "dump | inspect")->required()->check(CLI::IsMember({"dump", "inspect"}));
  d->add_option("file", ds_file, "dataset.csv")->required();
  auto* d_out = d->add_option("--out", ds_out, "Copy destination for dump");

  DeltaSweepCommand sweep;
  std::uint64_t sweep_seed = 0;
  std::string sweep_out;
  int sweep_threads = 0;
  auto* s = app.add_subcommand("delta-sweep", "Short runs per delta percentile");
  s->add_option("--config", sweep.config, "Experiment JSON")->required();
  s->add_option("--percentiles", sweep.percentiles, "Percentile candidates")->capture_default_str();
  auto* s_seed = s->add_option("--seed", sweep_seed, "Run only this seed");
  auto* s_out = s->add_option("--out", sweep_out, "Output directory");
  auto* s_threads = s->add_option("--threads", sweep_threads, "Seeds run in parallel");
  s->add_flag("--quiet", sweep.quiet, "No progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (t->parsed()) {
      if (*t_seed) train.seed = train_seed;
      if (*t_out) train.out = train_out;
      if (*t_threads) train.threads = train_threads;
      return cmd_train(train, std::cout, std::cerr);
    }
    if (e->parsed()) {
      if (*e_out) eval.out = eval_out;
      return cmd_eval(eval, std::cout);
    }
    if (x->parsed()) {
      return cmd_export(run_dir, artifact, *x_out ? std::optional<fs::path>(export_out) : std::nullopt, std::cout);
    }
    if (d->parsed()) {
      return cmd_dataset(ds_action, ds_file, *d_out ? std::optional<fs::path>(ds_out) : std::nullopt, std::cout);
    }
    if (s->parsed()) {
      if (*s_seed) sweep.seed = sweep_seed;
      if (*s_out) sweep.out = sweep_out;
      if (*s_threads) sweep.threads = sweep_threads;
      return cmd_delta_sweep(sweep, std::cout, std::cerr);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace i2c::cli
