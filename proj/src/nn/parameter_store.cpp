#include "i2c/nn/parameter_store.hpp"

#include "i2c/errors.hpp"

#include <cmath>
#include <numeric>

namespace i2c::nn {

std::size_t ParameterStore::add(std::string name, std::vector<std::size_t> shape,
                                std::vector<double> values) {
  if (shape.empty() || shape.size() > 2) {
    throw ConfigError("parameter '" + name + "' must be 1-D or 2-D");
  }
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        std::multiplies<>());
  if (n != values.size()) {
    throw ConfigError("parameter '" + name + "' shape does not match value count");
  }
  if (by_name_.contains(name)) {
    throw ConfigError("duplicate parameter '" + name + "'");
  }
  Entry e;
  e.name = name;
  e.shape = std::move(shape);
  e.values.assign(values.begin(), values.end());
  e.grads.assign(n, 0.0);
  e.first_moment.assign(n, 0.0);
  e.second_moment.assign(n, 0.0);
  entries_.push_back(std::move(e));
  by_name_.emplace(std::move(name), entries_.size() - 1);
  return entries_.size() - 1;
}

bool ParameterStore::contains(std::string_view name) const {
  return by_name_.find(name) != by_name_.end();
}

std::size_t ParameterStore::index(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

MatrixMap ParameterStore::values(std::size_t idx) {
  Entry& e = entries_.at(idx);
  return MatrixMap(e.values.data(), static_cast<Eigen::Index>(e.rows()),
                   static_cast<Eigen::Index>(e.cols()));
}

ConstMatrixMap ParameterStore::values(std::size_t idx) const {
  const Entry& e = entries_.at(idx);
  return ConstMatrixMap(e.values.data(), static_cast<Eigen::Index>(e.rows()),
                        static_cast<Eigen::Index>(e.cols()));
}

MatrixMap ParameterStore::grads(std::size_t idx) {
  Entry& e = entries_.at(idx);
  return MatrixMap(e.grads.data(), static_cast<Eigen::Index>(e.rows()),
                   static_cast<Eigen::Index>(e.cols()));
}

ConstMatrixMap ParameterStore::grads(std::size_t idx) const {
  const Entry& e = entries_.at(idx);
  return ConstMatrixMap(e.grads.data(), static_cast<Eigen::Index>(e.rows()),
                        static_cast<Eigen::Index>(e.cols()));
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) std::fill(e.grads.begin(), e.grads.end(), 0.0);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.size();
  return n;
}

bool ParameterStore::all_finite() const {
  for (const auto& e : entries_) {
    for (double v : e.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    for (double g : e.grads) sq += g * g;
  }
  return std::sqrt(sq);
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        entries_[i].shape != other.entries_[i].shape) {
      return false;
    }
  }
  return true;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (!same_layout(other)) throw ConfigError("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].values = other.entries_[i].values;
  }
}

void ParameterStore::blend_towards(const ParameterStore& online, double rate) {
  if (!same_layout(online)) throw ConfigError("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i].values;
    const auto& src = online.entries_[i].values;
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = (1.0 - rate) * dst[k] + rate * src[k];
    }
  }
}

}  // namespace i2c::nn
