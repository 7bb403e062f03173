#include "i2c/nn/distribution.hpp"

#include "i2c/errors.hpp"

#include <algorithm>
#include <cmath>

namespace i2c::nn {
namespace {

std::vector<double> floored(const std::vector<double>& p) {
  bool any = false;
  for (double v : p) any = any || v < kProbabilityFloor;
  if (!any) return p;
  std::vector<double> out(p.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    out[k] = std::max(p[k], kProbabilityFloor);
    total += out[k];
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace

double Distribution::max_probability() const {
  return probs.empty() ? 0.0 : *std::max_element(probs.begin(), probs.end());
}

std::size_t Distribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<double> log_softmax_temperature(std::span<const double> q, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InputError("softmax temperature must be positive and finite");
  }
  if (q.empty()) throw InputError("softmax over an empty action set");
  double top = -INFINITY;
  for (double v : q) {
    if (!std::isfinite(v)) throw NumericError("softmax input is not finite");
    top = std::max(top, lambda * v);
  }
  double total = 0.0;
  for (double v : q) total += std::exp(lambda * v - top);
  const double log_total = std::log(total) + top;
  std::vector<double> out(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) out[k] = lambda * q[k] - log_total;
  return out;
}

Distribution softmax_temperature(std::span<const double> q, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InputError("softmax temperature must be positive and finite");
  }
  if (q.empty()) throw InputError("softmax over an empty action set");
  double top = -INFINITY;
  for (double v : q) {
    if (!std::isfinite(v)) throw NumericError("softmax input is not finite");
    top = std::max(top, lambda * v);
  }
  Distribution d;
  d.probs.resize(q.size());
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    d.probs[k] = std::exp(lambda * q[k] - top);
    total += d.probs[k];
  }
  for (auto& p : d.probs) p /= total;
  return d;
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) {
    throw ConfigError("kl_divergence over distributions of different lengths");
  }
  const auto pf = floored(p.probs);
  const auto qf = floored(q.probs);
  double kl = 0.0;
  for (std::size_t k = 0; k < pf.size(); ++k) {
    if (pf[k] > 0.0) kl += pf[k] * std::log(pf[k] / qf[k]);
  }
  // Rounding can leave a tiny negative residue for near-identical inputs.
  return std::max(kl, 0.0);
}

bool is_valid(const Distribution& d, double tolerance) {
  if (d.probs.empty()) return false;
  double total = 0.0;
  for (double v : d.probs) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tolerance;
}

}  // namespace i2c::nn
