#pragma once

#include <span>
#include <vector>

namespace i2c::nn {

/// Probabilities over a finite action set. Entries lie in [0, 1] and sum
/// to one within 1e-9.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }
  double max_probability() const;
  std::size_t argmax() const;
};

/// Floor applied to both arguments of kl_divergence before renormalising.
inline constexpr double kProbabilityFloor = 1e-10;

/// probs[k] = exp(lambda q[k]) / sum_k' exp(lambda q[k']), stabilised by
/// subtracting the maximum. Throws NumericError on non-finite q and
/// InputError on lambda <= 0.
Distribution softmax_temperature(std::span<const double> q, double lambda);

/// Log-probabilities of softmax_temperature, computed without
/// exponentiating twice.
std::vector<double> log_softmax_temperature(std::span<const double> q, double lambda);

/// sum_k p[k] log(p[k] / q[k]) with 0 log 0 = 0, after flooring both
/// distributions at kProbabilityFloor. Throws ConfigError on length mismatch.
double kl_divergence(const Distribution& p, const Distribution& q);

/// Checks the Distribution invariants.
bool is_valid(const Distribution& d, double tolerance = 1e-9);

}  // namespace i2c::nn
