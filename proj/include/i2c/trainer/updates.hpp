#pragma once

#include "i2c/causal/dataset.hpp"
#include "i2c/comms/comms.hpp"
#include "i2c/trainer/models.hpp"
#include "i2c/trainer/replay_buffer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace i2c::trainer {

/// A sampled batch with the communication round replayed at o and o'
/// under the current gate.
struct PreparedBatch {
  std::vector<const JointTransition*> items;
  std::vector<std::vector<comms::MessageBundle>> bundles;
  std::vector<std::vector<comms::MessageBundle>> next_bundles;
  /// Message critic only: agent slots whose encoding the critic replaces
  /// with the absent placeholder for this update (message dropout).
  std::vector<std::vector<std::uint8_t>> dropped;
};

PreparedBatch prepare_batch(const Model& model, std::vector<const JointTransition*> items,
                            const comms::Gate& gate, double message_dropout, Rng& rng);

/// Critic regression inputs. Columns whose agent slot uses the absent
/// placeholder are listed in `absent_slots` and refilled from the current
/// placeholder on every loss evaluation.
struct CriticInputs {
  nn::Matrix x;
  std::vector<double> y;
  std::vector<std::pair<int, int>> absent_slots;  // (column, agent)
};

/// y = r + gamma * Q_target(a', o'), with a' sampled from the current
/// policies at o' after their own communication round.
std::vector<double> critic_targets(const Model& model, const PreparedBatch& batch, double gamma,
                                   bool use_target, Rng& rng);
CriticInputs critic_inputs(const Model& model, const PreparedBatch& batch, std::vector<double> y);
/// mean (Q - y)^2 over the batch; with `accumulate` the gradient is added
/// to model.critic_store (including the absent placeholder).
double critic_loss(Model& model, const CriticInputs& in, bool accumulate);

/// One column per (sample, live agent): o_i, m_i and the critic values
/// Q(a_i = k, a_-i, o) for every k.
struct PolicyInputs {
  nn::Matrix obs;
  std::vector<const comms::MessageBundle*> bundles;
  nn::Matrix q;
};

PolicyInputs policy_inputs(const Model& model, const PreparedBatch& batch);
/// Mean over columns of -sum_k pi_k q_k + eta * KL(pi || softmax(lambda q)).
/// The softmax target is a constant. With `accumulate` gradients reach
/// the policy and encoder parameters in model.policy_store.
double policy_loss(Model& model, const PolicyInputs& in, double lambda, double eta, bool accumulate);

struct PriorInputs {
  nn::Matrix x;
  std::vector<double> y;
};

PriorInputs prior_inputs(const Model& model, const causal::CausalDataset& dataset,
                         std::span<const std::size_t> rows);
/// Mean binary cross-entropy of the prior's sigmoid output.
double prior_loss(Model& model, const PriorInputs& in, bool accumulate);
/// Fraction of rows where (belief >= 0.5) == label.
double prior_accuracy(const Model& model, const PriorInputs& in);

double relative_error(double analytic, double numeric);

struct AuditResult {
  int checked = 0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Compares accumulated gradients with central differences on
/// `coordinates` randomly chosen parameters. Leaves the analytic gradient
/// in the store's grad buffers.
AuditResult audit_gradient(nn::ParameterStore& store, const std::function<double(bool)>& loss,
                           int coordinates, double step, Rng& rng);

struct UpdateOptions {
  double gamma = 0.95;
  double lambda = 10.0;
  double eta = 0.0;
  double tau = 0.01;
  bool target_network = true;
  double lr_critic = 1e-3;
  double lr_policy = 1e-3;
  double grad_clip = 0.0;
  nn::OptimizerConfig optimizer{};
  /// Spot-check every gradient against finite differences (rel. error).
  bool audit = false;
  double audit_tolerance = 1e-3;
  int audit_coordinates = 8;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
};

/// Critic step, then policy/encoder step against the updated critic, then
/// the soft target update. Throws DivergenceError on non-finite losses and
/// AuditError when an audited gradient disagrees with finite differences.
UpdateStats update(Model& model, const PreparedBatch& batch, const UpdateOptions& options, Rng& rng);

struct PriorReport {
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
  double positive_fraction = 0.0;
  bool single_class = false;
};

/// Minibatch Adam on BCE with a 10% held-out split.
PriorReport train_prior(Model& model, const causal::CausalDataset& labeled, int epochs,
                        int batch_size, double learning_rate, std::uint64_t seed);

}  // namespace i2c::trainer
