#pragma once

#include "i2c/causal/causal.hpp"
#include "i2c/comms/comms.hpp"
#include "i2c/envs/environment.hpp"
#include "i2c/nn/checkpoint.hpp"
#include "i2c/nn/layers.hpp"
#include "i2c/trainer/config.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace i2c::trainer {

struct ModelShape {
  int num_agents = 0;
  int num_actions = 0;
  int obs_dim = 0;
  int max_visible = 0;
  int hidden = 0;
  int encoder_hidden = 0;
  int encoder_layers = 0;
  int prior_hidden = 0;
  int id_dim = 0;
  nn::Nonlinearity nonlinearity = nn::Nonlinearity::LeakyRelu;
  comms::IdEncoding id_encoding = comms::IdEncoding::FovSlot;
  /// The critic also sees every agent's encoded messages.
  bool message_critic = false;

  static ModelShape make(const envs::Environment& env, const TrainConfig& config, Mode mode);
  int critic_input_size() const;
  bool operator==(const ModelShape&) const = default;
};

/// pi(a_i | c_i, o_i) with the message encoder e(m_i) in front. Columns are
/// (agent, sample) pairs; parameters are shared by all agents.
class PolicyModel {
 public:
  struct Tape {
    comms::MessageEncoder::Batch batch;
    nn::LstmTape lstm;
    nn::MlpTape mlp;
  };

  static PolicyModel declare(nn::ParameterStore& store, const ModelShape& shape, Rng& rng);
  static PolicyModel bind(const nn::ParameterStore& store, const ModelShape& shape);

  const comms::MessageEncoder& encoder() const { return encoder_; }
  const nn::Mlp& net() const { return net_; }

  /// `obs` is (obs_dim x M); one bundle per column.
  nn::Matrix logits(const nn::ParameterStore& store, const nn::Matrix& obs,
                    const std::vector<const comms::MessageBundle*>& bundles,
                    Tape* tape = nullptr) const;
  /// Accumulates parameter gradients (policy and encoder) into `store`.
  void backward(nn::ParameterStore& store, const Tape& tape, const nn::Matrix& dlogits) const;

 private:
  comms::MessageEncoder encoder_;
  nn::Mlp net_;
};

/// Q(a, o) or Q(a, o, c) over the stacked joint input
/// [o_1..o_N, onehot(a_1)..onehot(a_N), c_1..c_N]. Dead slots contribute
/// zero features and a zero action one-hot.
class CriticModel {
 public:
  static CriticModel declare(nn::ParameterStore& store, const ModelShape& shape, Rng& rng);
  static CriticModel bind(const nn::ParameterStore& store, const ModelShape& shape);

  const nn::Mlp& net() const { return net_; }
  /// Learned stand-in payload whose encoding means "no messages"
  /// (message critic only).
  std::optional<std::size_t> absent_payload() const { return absent_; }

  void fill_column(const ModelShape& shape, const envs::JointObservation& obs,
                   std::span<const int> actions, const nn::Matrix* encodings, nn::Matrix& x,
                   Eigen::Index column) const;
  nn::Matrix forward(const nn::ParameterStore& store, const nn::Matrix& x,
                     nn::MlpTape* tape = nullptr) const;

 private:
  nn::Mlp net_;
  std::optional<std::size_t> absent_;
};

/// All networks of one experiment and their parameter stores.
struct Model {
  ModelShape shape;
  PolicyModel policy;
  CriticModel critic;
  comms::PriorNetwork prior;
  nn::ParameterStore policy_store;
  nn::ParameterStore critic_store;
  nn::ParameterStore target_store;
  nn::ParameterStore prior_store;
  bool prior_trained = false;

  /// Fresh parameters drawn from the "init.*" substreams of `seed`.
  static Model create(const ModelShape& shape, std::uint64_t seed);

  /// Encoding of the absent-message placeholder, (encoder_hidden x 1).
  nn::Matrix absent_encoding(nn::LstmTape* tape = nullptr,
                             comms::MessageEncoder::Batch* batch = nullptr) const;
  /// Per-agent critic encodings (encoder_hidden x N): the encoded bundle,
  /// or the absent encoding for an empty bundle.
  nn::Matrix critic_encodings(std::span<const comms::MessageBundle> bundles) const;

  nn::Checkpoint to_checkpoint(const std::map<std::string, std::string>& metadata) const;
  /// Throws ConfigError if the checkpoint was made for a different shape.
  static Model from_checkpoint(const nn::Checkpoint& checkpoint, const ModelShape& expected);
  /// Shape recorded in a checkpoint's metadata.
  static ModelShape shape_of(const nn::Checkpoint& checkpoint);
};

/// Inverse-CDF draw from a probability column.
int sample_index(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng);
/// Lowest index of the largest entry.
int greedy_index(const Eigen::Ref<const Eigen::VectorXd>& values);
/// Column-wise softmax.
nn::Matrix softmax_columns(const nn::Matrix& logits);

/// Adapters so the causal module can query the neural critic.
class CriticActionValue : public causal::ActionValue {
 public:
  explicit CriticActionValue(const Model& model) : model_(model) {}
  int num_agents() const override { return model_.shape.num_agents; }
  int num_actions() const override { return model_.shape.num_actions; }
  std::vector<double> evaluate(const envs::JointObservation& o,
                               std::span<const causal::JointAction> actions) const override;

 private:
  const Model& model_;
};

class MessageCriticActionValue : public causal::MessageActionValue {
 public:
  explicit MessageCriticActionValue(const Model& model);
  int num_agents() const override { return model_.shape.num_agents; }
  int num_actions() const override { return model_.shape.num_actions; }
  int encoding_size() const override { return model_.shape.encoder_hidden; }
  std::vector<double> encode(const comms::MessageBundle& bundle) const override;
  std::vector<double> absent_encoding() const override;
  std::vector<double> evaluate(const envs::JointObservation& o,
                               std::span<const std::vector<double>> encodings,
                               std::span<const causal::JointAction> actions) const override;

 private:
  const Model& model_;
};

}  // namespace i2c::trainer
