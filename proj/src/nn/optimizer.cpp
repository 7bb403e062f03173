#include "i2c/nn/optimizer.hpp"

#include "i2c/errors.hpp"

#include <cmath>

namespace i2c::nn {

void optimizer_step(ParameterStore& store, double learning_rate, const OptimizerConfig& config) {
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  for (const auto& e : store.entries()) {
    for (double g : e.grads) {
      if (!std::isfinite(g)) {
        throw DivergenceError("non-finite gradient in parameter '" + e.name + "'");
      }
    }
  }
  const std::uint64_t step = store.optimizer_steps() + 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t idx = 0; idx < store.entry_count(); ++idx) {
    auto& e = store.entry(idx);
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double g = e.grads[k];
      if (config.kind == OptimizerKind::Sgd) {
        e.values[k] -= learning_rate * g;
      } else {
        e.first_moment[k] = config.beta1 * e.first_moment[k] + (1.0 - config.beta1) * g;
        e.second_moment[k] = config.beta2 * e.second_moment[k] + (1.0 - config.beta2) * g * g;
        const double m_hat = e.first_moment[k] / bc1;
        const double v_hat = e.second_moment[k] / bc2;
        e.values[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      }
      e.grads[k] = 0.0;
    }
  }
  store.set_optimizer_steps(step);
  store.bump_version();
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  const double norm = store.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t idx = 0; idx < store.entry_count(); ++idx) {
      for (auto& g : store.entry(idx).grads) g *= scale;
    }
  }
  return norm;
}

}  // namespace i2c::nn
