#include "i2c/trainer/replay_buffer.hpp"

#include "i2c/errors.hpp"

#include <string>
#include <unordered_set>

namespace i2c::trainer {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(JointTransition t) {
  ++added_;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const JointTransition& ReplayBuffer::at(std::size_t k) const {
  if (k >= data_.size()) throw InputError("replay index out of range");
  return data_[(head_ + k) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (count > data_.size()) {
    throw InputError("cannot sample " + std::to_string(count) + " transitions from a buffer of " +
                     std::to_string(data_.size()));
  }
  // Floyd's algorithm: distinct indices in O(count).
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> chosen;
  const std::size_t n = data_.size();
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

std::vector<const JointTransition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  std::vector<const JointTransition*> out;
  for (std::size_t k : sample_indices(count, rng)) out.push_back(&at(k));
  return out;
}

}  // namespace i2c::trainer
