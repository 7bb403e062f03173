#pragma once

#include "i2c/causal/dataset.hpp"
#include "i2c/envs/environment.hpp"
#include "i2c/trainer/config.hpp"
#include "i2c/trainer/models.hpp"
#include "i2c/trainer/rollout.hpp"
#include "i2c/trainer/updates.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace i2c::trainer {

struct RunSpec {
  std::string experiment = "run";
  envs::EnvConfig env;
  TrainConfig train;
  Mode mode = Mode::I2c;
  double p_comm = 0.5;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool audit = false;
  /// Phase-one checkpoint shared between runs: loaded when it exists and
  /// carries the same fingerprint, written after training otherwise.
  std::filesystem::path phase1_checkpoint;
  std::string phase1_fingerprint;
  std::ostream* log = nullptr;
};

struct RunResult {
  std::optional<EvalSummary> final_eval;
  std::optional<causal::DeltaSelection> delta;
  std::optional<PriorReport> prior;
  std::vector<IntervalMetrics> phase1;
  std::vector<IntervalMetrics> phase2;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path final_checkpoint;
};

/// Files written to out_dir:
///   metrics-<phase>.csv   episode,reward_mean,reward_std,<metric>,overhead
///   timing-<phase>.csv    episode,wall_seconds
///   <experiment>-<phase>-<episode>.ckpt
///   dataset.csv (+ .meta.json), delta.csv, prior.json   (prior modes)
///   eval.csv, trajectories.csv, comm_log.csv            (final evaluation)
///
/// no-comm trains phase one only; fc and rc train phase two only; the
/// prior modes train phase one, harvest causal effects, pick delta, train
/// the prior and then train phase two from scratch with the prior frozen.
RunResult run_two_phase(const RunSpec& spec);

/// Phase-two model trained for `episodes` with a prior fitted to
/// `labeled`; returns its evaluation. Used by the delta grid search and
/// the delta sweep.
EvalSummary short_phase_two(const RunSpec& spec, const causal::CausalDataset& labeled,
                            int episodes, std::uint64_t seed);

/// Final evaluation settings shared by every mode, so runs with the same
/// root seed are scored on the same episodes.
EvalOptions final_eval_options(const RunSpec& spec);

/// Writes a metrics file and its timing companion.
void write_metrics(const std::filesystem::path& dir, const std::string& phase,
                   const std::string& producer, const std::string& metric,
                   const std::vector<IntervalMetrics>& rows);
void write_eval_summary(const std::filesystem::path& path, const std::string& producer,
                        const EvalSummary& s);

std::string checkpoint_name(const std::string& experiment, const std::string& phase, int episode);

}  // namespace i2c::trainer
