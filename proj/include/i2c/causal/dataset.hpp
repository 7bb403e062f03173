#pragma once

#include "i2c/causal/causal.hpp"
#include "i2c/comms/comms.hpp"
#include "i2c/envs/environment.hpp"
#include "i2c/rng.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace i2c::causal {

/// Samples one action per agent from the current decentralised policies.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;
  virtual JointAction sample(const envs::JointObservation& o, Rng& rng) const = 0;
};

/// One labelled influence measurement. `target` is -1 for a message
/// (broadcast) sample, and `target_slot` is the target's field-of-view rank.
struct CausalSample {
  int observer = 0;
  int target = 0;
  int target_slot = 0;
  std::vector<double> observation;
  double effect = 0.0;
  int label = 0;
};

struct CausalDataset {
  std::vector<CausalSample> samples;
  std::string source;
  std::string env;
  double lambda = kDefaultLambda;
  std::optional<double> delta;
  comms::IdEncoding id_encoding = comms::IdEncoding::FovSlot;
  int num_agents = 0;
  int max_visible = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// d_j for sample k under the dataset's id encoding.
  std::vector<double> identifier(std::size_t k) const;
};

struct CollectOptions {
  int episodes = 1;
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  comms::IdEncoding id_encoding = comms::IdEncoding::FovSlot;
  std::string source;
};

/// One sample per (step, live agent i, j in field_of_view(i)), with a_-i
/// drawn from `policy`. Agents with an empty field of view add nothing.
CausalDataset collect_dataset(const JointPolicy& policy, const ActionValue& critic,
                              envs::Environment& env, const CollectOptions& options);

/// One sample per (step, live agent with a nonempty field of view): the
/// effect of the full set of replies it would receive.
CausalDataset collect_message_dataset(const JointPolicy& policy, const MessageActionValue& critic,
                                      envs::Environment& env, const CollectOptions& options);

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
/// Throws InputError on empty input or p outside (0, 100).
double percentile(std::vector<double> values, double p);

/// Percentile -> delta over the dataset's effects.
std::map<double, double> percentile_deltas(const CausalDataset& dataset,
                                           std::span<const double> percentiles);

struct DeltaSelection {
  double delta = 0.0;
  double percentile = 0.0;
  std::map<double, double> candidates;
  std::map<double, double> scores;
};

/// Grid search over percentile candidates. `validate` maps a delta to a
/// score (higher is better); ties keep the higher percentile. Without a
/// validator the first listed percentile wins.
DeltaSelection select_delta(const CausalDataset& dataset, std::span<const double> percentiles,
                            const std::function<double(double)>& validate = {});

/// label = 1 iff effect >= delta. Throws InputError for delta < 0 or NaN.
CausalDataset label(CausalDataset dataset, double delta);
double positive_fraction(const CausalDataset& dataset);

/// CSV with columns observer,target,target_slot,o_0..o_{d-1},effect,label
/// plus a `<path>.meta.json` sidecar (lambda, delta, source, env, ids).
void save_dataset(const std::filesystem::path& path, const CausalDataset& dataset);
CausalDataset load_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace i2c::causal
