#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace i2c::testing {

namespace {

std::size_t table_index(const causal::JointAction& a, int actions) {
  std::size_t idx = 0;
  for (std::size_t k = a.size(); k-- > 0;) idx = idx * static_cast<std::size_t>(actions) + a[k];
  return idx;
}

std::size_t table_size(int agents, int actions) {
  std::size_t n = 1;
  for (int k = 0; k < agents; ++k) n *= static_cast<std::size_t>(actions);
  return n;
}

causal::JointAction decode(std::size_t idx, int agents, int actions) {
  causal::JointAction a(static_cast<std::size_t>(agents));
  for (int k = 0; k < agents; ++k) {
    a[k] = static_cast<int>(idx % actions);
    idx /= actions;
  }
  return a;
}

}  // namespace

TableCritic::TableCritic(int agents, int actions, std::vector<double> table)
    : agents_(agents), actions_(actions), table_(std::move(table)) {}

TableCritic TableCritic::random(int agents, int actions, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> t(table_size(agents, actions));
  for (double& v : t) v = n(rng);
  return TableCritic(agents, actions, std::move(t));
}

TableCritic TableCritic::separable(int agents, int actions, int j, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> f(static_cast<std::size_t>(actions));
  for (double& v : f) v = n(rng);
  std::vector<double> g(table_size(agents, actions));
  for (double& v : g) v = n(rng);
  std::vector<double> t(table_size(agents, actions));
  for (std::size_t idx = 0; idx < t.size(); ++idx) {
    auto a = decode(idx, agents, actions);
    const int aj = a[j];
    a[j] = 0;
    t[idx] = f[aj] + g[table_index(a, actions)];
  }
  return TableCritic(agents, actions, std::move(t));
}

double TableCritic::q(const causal::JointAction& a) const { return table_[table_index(a, actions_)]; }

std::vector<double> TableCritic::evaluate(const envs::JointObservation&,
                                          std::span<const causal::JointAction> actions) const {
  ++calls;
  std::vector<double> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(q(a));
  return out;
}

std::vector<double> FunctionCritic::evaluate(const envs::JointObservation&,
                                             std::span<const causal::JointAction> actions) const {
  std::vector<double> out;
  for (const auto& a : actions) out.push_back(f_(a));
  return out;
}

std::vector<double> brute_force_conditional(const TableCritic& q, int i, const causal::JointAction& a,
                                            double lambda) {
  const int A = q.num_actions();
  std::vector<double> w(static_cast<std::size_t>(A));
  double z = 0.0;
  for (int k = 0; k < A; ++k) {
    auto b = a;
    b[i] = k;
    w[k] = std::exp(lambda * q.q(b));
    z += w[k];
  }
  for (double& v : w) v /= z;
  return w;
}

std::vector<double> brute_force_marginal(const TableCritic& q, int i, int j,
                                         const causal::JointAction& a, double lambda) {
  const int A = q.num_actions();
  std::vector<double> joint(static_cast<std::size_t>(A * A));
  double z = 0.0;
  for (int ki = 0; ki < A; ++ki) {
    for (int kj = 0; kj < A; ++kj) {
      auto b = a;
      b[i] = ki;
      b[j] = kj;
      joint[ki * A + kj] = std::exp(lambda * q.q(b));
      z += joint[ki * A + kj];
    }
  }
  std::vector<double> m(static_cast<std::size_t>(A), 0.0);
  for (int ki = 0; ki < A; ++ki) {
    for (int kj = 0; kj < A; ++kj) m[ki] += joint[ki * A + kj] / z;
  }
  return m;
}

double brute_force_effect(const TableCritic& q, int i, int j, const causal::JointAction& a,
                          double lambda) {
  const auto p = brute_force_conditional(q, i, a, lambda);
  const auto m = brute_force_marginal(q, i, j, a, lambda);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / m[k]);
  }
  return kl;
}

double particle_reward_oracle(const envs::ParticleState& s, double agent_size, double penalty) {
  double total = 0.0;
  for (const auto& t : s.target_pos) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : s.agent_pos) best = std::min(best, std::hypot(p.x - t.x, p.y - t.y));
    total -= best;
  }
  int pairs = 0;
  for (std::size_t a = 0; a < s.agent_pos.size(); ++a) {
    for (std::size_t b = a + 1; b < s.agent_pos.size(); ++b) {
      const auto d = std::hypot(s.agent_pos[a].x - s.agent_pos[b].x, s.agent_pos[a].y - s.agent_pos[b].y);
      if (d < 2.0 * agent_size) ++pairs;
    }
  }
  return total + pairs * penalty;
}

envs::JointObservation blank_observation(int agents, int dim) {
  envs::JointObservation o(agents, dim, agents - 1);
  for (int i = 0; i < agents; ++i) {
    int slot = 0;
    for (int j = 0; j < agents; ++j) {
      if (j != i) o.visible[static_cast<std::size_t>(i * (agents - 1) + slot++)] = j;
    }
    o.alive[static_cast<std::size_t>(i)] = 1;
  }
  return o;
}

double central_difference(const std::function<double()>& loss, double& x, double h) {
  const double x0 = x;
  x = x0 + h;
  const double up = loss();
  x = x0 - h;
  const double down = loss();
  x = x0;
  return (up - down) / (2.0 * h);
}

}  // namespace i2c::testing
