#pragma once

#include "i2c/nn/parameter_store.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace i2c::nn {

/// A set of named parameter stores plus string metadata.
///
/// On-disk layout (all integers and floats little-endian):
///
///     magic            8 bytes  "I2CCKPT\0"
///     format_version   u32      currently 1
///     metadata_count   u32
///       key_len u32, key bytes, value_len u32, value bytes
///     store_count      u32
///       name_len u32, name bytes
///       version u64, optimizer_steps u64
///       entry_count u32
///         name_len u32, name bytes
///         ndim u32, dims u64[ndim]
///         values f64[n], adam_m f64[n], adam_v f64[n]
///
/// Stores and metadata are written in key order, so saving the same
/// checkpoint twice yields identical bytes.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::map<std::string, ParameterStore> stores;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws ConfigError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace i2c::nn
