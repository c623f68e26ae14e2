#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "s2vae/layers.hpp"

namespace s2vae::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Decoded checkpoint container: an opaque config record (JSON text) and
/// named parameter arrays in store order.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;
  std::vector<std::pair<std::string, Mat>> params;
};

/// Layout (all integers little-endian):
///   "S2VAECKP" | u32 version | u64 len | config bytes | u64 count |
///   count x ( u32 name_len | name | u64 rows | u64 cols | rows*cols f64, row-major )
void write_checkpoint(const std::string& path, const Checkpoint& ckp);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint snapshot(const ParamStore& store, std::string config_json);
/// Copies values into `store`; names, order and shapes must match exactly
/// (ConfigMismatch otherwise).
void restore(ParamStore& store, const Checkpoint& ckp);

}  // namespace s2vae::nn
