#pragma once

#include "i2c/envs/observation.hpp"
#include "i2c/rng.hpp"

#include <cstddef>
#include <vector>

namespace i2c::trainer {

struct JointTransition {
  envs::JointObservation obs;
  std::vector<int> actions;
  double reward = 0.0;
  envs::JointObservation next_obs;
};

/// Fixed-capacity FIFO of joint transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  /// Total transitions ever added, including evicted ones.
  std::size_t total_added() const { return added_; }

  void add(JointTransition t);
  /// Oldest first.
  const JointTransition& at(std::size_t k) const;
  /// `count` distinct indices drawn uniformly. Throws InputError if the
  /// buffer holds fewer than `count` transitions.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  std::vector<const JointTransition*> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t added_ = 0;
  std::vector<JointTransition> data_;
};

}  // namespace i2c::trainer
