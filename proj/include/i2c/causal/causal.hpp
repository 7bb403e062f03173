#pragma once

#include "i2c/comms/comms.hpp"
#include "i2c/envs/observation.hpp"
#include "i2c/nn/distribution.hpp"

#include <span>
#include <vector>

namespace i2c::causal {

using JointAction = std::vector<int>;

inline constexpr double kDefaultLambda = 10.0;

/// Centralised joint action-value Q(a, o).
class ActionValue {
 public:
  virtual ~ActionValue() = default;
  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  /// Q for each joint action at joint observation `o`.
  virtual std::vector<double> evaluate(const envs::JointObservation& o,
                                       std::span<const JointAction> actions) const = 0;
};

/// Q(a, o, c): joint action-value that also sees every agent's encoded
/// messages. `absent_encoding` stands in for "no messages received".
class MessageActionValue {
 public:
  virtual ~MessageActionValue() = default;
  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  virtual int encoding_size() const = 0;
  virtual std::vector<double> encode(const comms::MessageBundle& bundle) const = 0;
  virtual std::vector<double> absent_encoding() const = 0;
  /// `encodings` holds one vector per agent.
  virtual std::vector<double> evaluate(const envs::JointObservation& o,
                                       std::span<const std::vector<double>> encodings,
                                       std::span<const JointAction> actions) const = 0;
};

/// P(a_i | a_-i, o): softmax over Q with agent i's action varied. `a[i]`
/// is ignored.
nn::Distribution conditional_policy_dist(const ActionValue& critic, int i, const JointAction& a,
                                         const envs::JointObservation& o, double lambda);

/// P(a_i | a_-ij, o): the joint (a_i, a_j) softmax summed over a_j.
/// `a[i]` and `a[j]` are ignored. Throws InputError if i == j.
nn::Distribution marginal_policy_dist(const ActionValue& critic, int i, int j,
                                      const JointAction& a, const envs::JointObservation& o,
                                      double lambda);

/// I_i^j = KL(P(a_i | a_-i, o) || P(a_i | a_-ij, o)), evaluated from
/// log-probabilities so vanishing probabilities need no flooring.
double causal_effect(const ActionValue& critic, int i, int j, const JointAction& a,
                     const envs::JointObservation& o, double lambda);

/// causal_effect of every agent in `targets` on agent i, with a single
/// batched critic call.
std::vector<double> causal_effects(const ActionValue& critic, int i, std::span<const int> targets,
                                   const JointAction& a, const envs::JointObservation& o,
                                   double lambda);

/// KL(P(a_i | a_-i, m_i, o) || P(a_i | a_-i, o)), with the other agents'
/// messages held fixed and agent i's replaced by the absent encoding.
double message_causal_effect(const MessageActionValue& critic, int i, const JointAction& a,
                             std::span<const comms::MessageBundle> bundles,
                             const envs::JointObservation& o, double lambda);

}  // namespace i2c::causal
