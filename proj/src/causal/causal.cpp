#include "i2c/causal/causal.hpp"

#include "i2c/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace i2c::causal {

namespace {

void check_inputs(int n, int actions, int i, const JointAction& a, const envs::JointObservation& o) {
  if (static_cast<int>(a.size()) != n) {
    throw ConfigError("joint action has " + std::to_string(a.size()) + " entries, critic expects " +
                      std::to_string(n));
  }
  if (o.num_agents != n) {
    throw ConfigError("joint observation has " + std::to_string(o.num_agents) +
                      " agents, critic expects " + std::to_string(n));
  }
  if (i < 0 || i >= n) throw InputError("agent index " + std::to_string(i) + " out of range");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (static_cast<int>(k) == i) continue;
    if (a[k] < 0 || a[k] >= actions) throw InputError("joint action entry out of range");
  }
}

void check_values(const std::vector<double>& q, std::size_t expected) {
  if (q.size() != expected) {
    throw ConfigError("critic returned " + std::to_string(q.size()) + " values, expected " +
                      std::to_string(expected));
  }
}

// Softmax over the |A_i| x |A_j| block, summed over a_j.
nn::Distribution marginal_from_block(std::span<const double> q, int actions, double lambda) {
  const auto joint = nn::softmax_temperature(q, lambda);
  nn::Distribution d;
  d.probs.assign(static_cast<std::size_t>(actions), 0.0);
  for (int ai = 0; ai < actions; ++ai) {
    for (int aj = 0; aj < actions; ++aj) {
      d.probs[static_cast<std::size_t>(ai)] += joint.probs[static_cast<std::size_t>(ai * actions + aj)];
    }
  }
  return d;
}

double log_sum_exp(std::span<const double> x, double lambda) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : x) top = std::max(top, lambda * v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(lambda * v - top);
  return top + std::log(sum);
}

// KL between two temperature softmaxes given their log-probabilities.
double kl_from_logs(const std::vector<double>& log_p, const std::vector<double>& log_q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < log_p.size(); ++k) kl += std::exp(log_p[k]) * (log_p[k] - log_q[k]);
  return std::max(kl, 0.0);
}

std::vector<double> log_conditional(std::span<const double> q, double lambda) {
  return nn::log_softmax_temperature(q, lambda);
}

std::vector<double> log_marginal(std::span<const double> block, int actions, double lambda) {
  const double total = log_sum_exp(block, lambda);
  std::vector<double> out(static_cast<std::size_t>(actions));
  for (int ai = 0; ai < actions; ++ai) {
    out[static_cast<std::size_t>(ai)] =
        log_sum_exp(block.subspan(static_cast<std::size_t>(ai * actions), static_cast<std::size_t>(actions)),
                    lambda) -
        total;
  }
  return out;
}

void append_conditional(std::vector<JointAction>& out, int i, const JointAction& a, int actions) {
  JointAction x = a;
  for (int k = 0; k < actions; ++k) {
    x[static_cast<std::size_t>(i)] = k;
    out.push_back(x);
  }
}

void append_joint(std::vector<JointAction>& out, int i, int j, const JointAction& a, int actions) {
  JointAction x = a;
  for (int ai = 0; ai < actions; ++ai) {
    for (int aj = 0; aj < actions; ++aj) {
      x[static_cast<std::size_t>(i)] = ai;
      x[static_cast<std::size_t>(j)] = aj;
      out.push_back(x);
    }
  }
}

}  // namespace

nn::Distribution conditional_policy_dist(const ActionValue& critic, int i, const JointAction& a,
                                         const envs::JointObservation& o, double lambda) {
  const int n_act = critic.num_actions();
  check_inputs(critic.num_agents(), n_act, i, a, o);
  std::vector<JointAction> batch;
  append_conditional(batch, i, a, n_act);
  const auto q = critic.evaluate(o, batch);
  check_values(q, batch.size());
  return nn::softmax_temperature(q, lambda);
}

nn::Distribution marginal_policy_dist(const ActionValue& critic, int i, int j,
                                      const JointAction& a, const envs::JointObservation& o,
                                      double lambda) {
  if (i == j) throw InputError("marginal_policy_dist needs two distinct agents");
  const int n_act = critic.num_actions();
  JointAction filled = a;
  if (j >= 0 && j < static_cast<int>(filled.size())) filled[static_cast<std::size_t>(j)] = 0;
  check_inputs(critic.num_agents(), n_act, i, filled, o);
  if (j < 0 || j >= critic.num_agents()) throw InputError("agent index out of range");
  std::vector<JointAction> batch;
  append_joint(batch, i, j, filled, n_act);
  const auto q = critic.evaluate(o, batch);
  check_values(q, batch.size());
  return marginal_from_block(q, n_act, lambda);
}

double causal_effect(const ActionValue& critic, int i, int j, const JointAction& a,
                     const envs::JointObservation& o, double lambda) {
  const std::array<int, 1> target{j};
  return causal_effects(critic, i, target, a, o, lambda).front();
}

std::vector<double> causal_effects(const ActionValue& critic, int i, std::span<const int> targets,
                                   const JointAction& a, const envs::JointObservation& o,
                                   double lambda) {
  const int n_act = critic.num_actions();
  const int n = critic.num_agents();
  check_inputs(n, n_act, i, a, o);
  for (int j : targets) {
    if (j == i) throw InputError("an agent has no causal effect on itself here");
    if (j < 0 || j >= n) throw InputError("agent index out of range");
  }
  std::vector<JointAction> batch;
  batch.reserve(static_cast<std::size_t>(n_act) * (1 + targets.size() * static_cast<std::size_t>(n_act)));
  append_conditional(batch, i, a, n_act);
  for (int j : targets) append_joint(batch, i, j, a, n_act);
  const auto q = critic.evaluate(o, batch);
  check_values(q, batch.size());

  const std::span<const double> all(q);
  const auto log_p = log_conditional(all.first(static_cast<std::size_t>(n_act)), lambda);
  std::vector<double> out;
  out.reserve(targets.size());
  const auto block = static_cast<std::size_t>(n_act * n_act);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto log_m =
        log_marginal(all.subspan(static_cast<std::size_t>(n_act) + t * block, block), n_act, lambda);
    out.push_back(kl_from_logs(log_p, log_m));
  }
  return out;
}

double message_causal_effect(const MessageActionValue& critic, int i, const JointAction& a,
                             std::span<const comms::MessageBundle> bundles,
                             const envs::JointObservation& o, double lambda) {
  const int n = critic.num_agents();
  const int n_act = critic.num_actions();
  check_inputs(n, n_act, i, a, o);
  if (static_cast<int>(bundles.size()) != n) {
    throw ConfigError("one message bundle per agent is required");
  }
  std::vector<std::vector<double>> enc;
  enc.reserve(bundles.size());
  for (const auto& b : bundles) enc.push_back(critic.encode(b));
  auto absent = critic.absent_encoding();
  const auto width = static_cast<std::size_t>(critic.encoding_size());
  if (absent.size() != width) {
    throw ConfigError("absent-message encoding has " + std::to_string(absent.size()) +
                      " entries, critic expects " + std::to_string(width));
  }
  for (const auto& e : enc) {
    if (e.size() != width) throw ConfigError("message encoding width mismatch");
  }
  std::vector<JointAction> batch;
  append_conditional(batch, i, a, n_act);

  const auto q_with = critic.evaluate(o, enc, batch);
  check_values(q_with, batch.size());
  enc[static_cast<std::size_t>(i)] = std::move(absent);
  const auto q_without = critic.evaluate(o, enc, batch);
  check_values(q_without, batch.size());
  return kl_from_logs(log_conditional(q_with, lambda), log_conditional(q_without, lambda));
}

}  // namespace i2c::causal
