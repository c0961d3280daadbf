#pragma once

#include <string>

#include "rmlab/model.hpp"

namespace rmlab {

// Single-file binary checkpoint. Layout (little-endian):
//   magic "RMCK"            4 bytes
//   format version          u32
//   config header length    u32, then that many bytes of JSON
//                           ({"backbone": ..., "head": ...})
//   parameter count         u32
//   per parameter, in store order:
//     name length u32, name bytes,
//     rank u32, dims u32 each,
//     values f64 each
//   FNV-1a 64 checksum      u64 over everything after the magic
// Loading rebuilds the model from the header and requires the parameter
// names and shapes to match that architecture exactly.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const RewardModel& model);
RewardModel load_checkpoint(const std::string& path);

}  // namespace rmlab
