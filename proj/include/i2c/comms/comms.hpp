#pragma once

#include "i2c/envs/observation.hpp"
#include "i2c/envs/traffic.hpp"
#include "i2c/nn/layers.hpp"
#include "i2c/rng.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace i2c::comms {

/// How the prior network identifies a target agent.
///   FovSlot: one-hot over the observer's field-of-view slots (the target's
///            rank by distance), which lines up with the relative
///            positions in the observer's own observation.
///   AgentId: one-hot over all agent ids.
///   None:    no identifier; the prior gates a broadcast request.
enum class IdEncoding { FovSlot, AgentId, None };

std::string to_string(IdEncoding e);
IdEncoding id_encoding_from_string(std::string_view name);
int id_dimension(IdEncoding encoding, int num_agents, int max_visible);
std::vector<double> target_identifier(IdEncoding encoding, int target, int slot, int num_agents,
                                      int max_visible);

struct PriorBelief {
  int observer = 0;
  int target = 0;
  double probability = 0.0;
};

/// A reply: the sender's raw observation.
struct Message {
  int sender = 0;
  std::vector<double> payload;
};
using MessageBundle = std::vector<Message>;

/// b(o_i, d_j): two fully connected layers ending in a sigmoid.
class PriorNetwork {
 public:
  PriorNetwork() = default;
  static PriorNetwork declare(nn::ParameterStore& store, const std::string& prefix, int obs_dim,
                              int id_dim, int hidden, nn::Nonlinearity nl, Rng& rng);
  static PriorNetwork bind(const nn::ParameterStore& store, const std::string& prefix, int obs_dim,
                           int id_dim, int hidden, nn::Nonlinearity nl);

  int obs_dim() const { return obs_dim_; }
  int id_dim() const { return id_dim_; }
  const nn::Mlp& net() const { return net_; }

  /// Throws ConfigError if either input has the wrong length.
  double belief(const nn::ParameterStore& store, std::span<const double> obs,
                std::span<const double> id) const;
  /// Logits for a batch of stacked [obs; id] columns.
  nn::Matrix logits(const nn::ParameterStore& store, const nn::Matrix& inputs,
                    nn::MlpTape* tape = nullptr) const;

 private:
  int obs_dim_ = 0;
  int id_dim_ = 0;
  nn::Mlp net_;
};

/// Beliefs for every (observer, field-of-view target) pair of live agents.
/// With IdEncoding::None one belief per observer is replicated to all of
/// its targets.
std::vector<PriorBelief> prior_beliefs(const PriorNetwork& prior, const nn::ParameterStore& store,
                                       const envs::JointObservation& obs, IdEncoding encoding);

inline constexpr double kRequestThreshold = 0.5;

/// Requests go out where belief >= threshold; every request is answered
/// with the target's observation. Bundles follow field-of-view order.
/// Throws InputError for a belief about an agent outside the observer's
/// field of view.
std::vector<MessageBundle> request_round(std::span<const PriorBelief> beliefs,
                                         const envs::JointObservation& obs,
                                         double threshold = kRequestThreshold);

enum class GateMode { Prior, Full, None, Random, BroadcastPrior };
std::string to_string(GateMode m);

struct Gate {
  GateMode mode = GateMode::None;
  double p_comm = 0.5;
  double threshold = kRequestThreshold;
};

/// Beliefs for one step under a gating mode: the prior (per pair or
/// broadcast), constant 1 (full), constant 0 (none) or Bernoulli(p_comm)
/// draws mapped to 1/0 (random).
std::vector<PriorBelief> gate_beliefs(const Gate& gate, const PriorNetwork* prior,
                                      const nn::ParameterStore* prior_store,
                                      const envs::JointObservation& obs, IdEncoding encoding,
                                      Rng& rng);

/// Stacked LSTM over a message bundle; the final top-layer hidden state is
/// the encoded message c_i. An empty bundle encodes to the zero initial
/// state. The encoding depends on message order.
class MessageEncoder {
 public:
  struct Batch {
    std::vector<nn::Matrix> steps;
    std::vector<Eigen::RowVectorXd> masks;
    int columns = 0;
  };

  MessageEncoder() = default;
  static MessageEncoder declare(nn::ParameterStore& store, const std::string& prefix,
                                int payload_size, int hidden, int layers, Rng& rng);
  static MessageEncoder bind(const nn::ParameterStore& store, const std::string& prefix,
                             int payload_size, int hidden, int layers);

  int payload_size() const { return lstm_.input_size(); }
  int encoding_size() const { return lstm_.hidden_size(); }
  const nn::Lstm& lstm() const { return lstm_; }

  /// Throws ConfigError on a payload length mismatch.
  Batch make_batch(const std::vector<const MessageBundle*>& bundles) const;
  nn::Matrix forward(const nn::ParameterStore& store, const Batch& batch,
                     nn::LstmTape* tape = nullptr) const;
  std::vector<double> encode(const nn::ParameterStore& store, const MessageBundle& bundle) const;

 private:
  nn::Lstm lstm_;
};

/// Who observed and who requested at one step. `cells` is filled for the
/// traffic junction only.
struct CommRecord {
  int step = 0;
  std::vector<int> observed;
  std::vector<int> requested;
  std::vector<std::uint8_t> alive;
  std::vector<envs::Cell> cells;
};

CommRecord make_comm_record(int step, const envs::JointObservation& obs,
                            std::span<const MessageBundle> bundles);

enum class Granularity { PerStep, PerLocation };

/// Ratio for one bucket; `ratio` is empty when the denominator is zero.
struct OverheadBucket {
  int step = -1;
  envs::Cell cell{};
  long long numerator = 0;
  long long denominator = 0;
  std::optional<double> ratio;
};

/// Per step: requested / observed summed over live agents. Per location:
/// visits by communicating cars (requested > 0) / all car visits per cell.
std::vector<OverheadBucket> overhead(std::span<const CommRecord> records, Granularity granularity);
/// Pooled requested / observed over all records; empty if nothing observed.
std::optional<double> overall_overhead(std::span<const CommRecord> records);

}  // namespace i2c::comms
