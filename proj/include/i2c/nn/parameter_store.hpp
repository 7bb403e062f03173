#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace i2c::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
/// Aligned so that Eigen kernels take the same code path whatever the heap
/// address, which keeps results bit-identical across runs.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Named flat parameter arrays with matching gradient buffers and Adam
/// moments. Entries are 1-D or 2-D and stored column-major so they map
/// directly onto Eigen matrices.
///
/// A store is single-writer. Copies are cheap value snapshots and keep the
/// entry layout, so indices resolved against one store stay valid for its
/// copies (target networks, rollout snapshots).
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    Buffer values;
    Buffer grads;
    Buffer first_moment;
    Buffer second_moment;

    std::size_t size() const { return values.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  };

  /// Registers a new entry and returns its index. Throws ConfigError on a
  /// duplicate name or when `values` does not match `shape`.
  std::size_t add(std::string name, std::vector<std::size_t> shape,
                  std::vector<double> values);

  bool contains(std::string_view name) const;
  /// Index of a named entry; throws ConfigError if absent.
  std::size_t index(std::string_view name) const;

  std::size_t entry_count() const { return entries_.size(); }
  Entry& entry(std::size_t idx) { return entries_.at(idx); }
  const Entry& entry(std::size_t idx) const { return entries_.at(idx); }
  const std::vector<Entry>& entries() const { return entries_; }

  MatrixMap values(std::size_t idx);
  ConstMatrixMap values(std::size_t idx) const;
  MatrixMap grads(std::size_t idx);
  ConstMatrixMap grads(std::size_t idx) const;

  void zero_grad();
  std::size_t parameter_count() const;
  bool all_finite() const;
  double grad_norm() const;

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  std::uint64_t optimizer_steps() const { return optimizer_steps_; }
  void set_optimizer_steps(std::uint64_t n) { optimizer_steps_ = n; }
  void set_version(std::uint64_t v) { version_ = v; }

  /// Copies values from a store with the identical layout.
  void copy_values_from(const ParameterStore& other);
  /// target <- (1 - rate) * target + rate * online, entry by entry.
  void blend_towards(const ParameterStore& online, double rate);
  bool same_layout(const ParameterStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::uint64_t version_ = 0;
  std::uint64_t optimizer_steps_ = 0;
};

}  // namespace i2c::nn
