#pragma once

#include <string>

#include "ade/params.hpp"

namespace ade {

// Binary checkpoint of parameter values (gradients, moments and the step
// counter are not persisted). Layout, all integers little-endian uint64:
//
//   u64 format_version (currently 1)
//   u64 tensor_count
//   per tensor, in sorted name order:
//     u64 name_length, name bytes (UTF-8, no terminator)
//     u64 rank, u64 dims[rank]
//     f32 values[prod(dims)] (little-endian IEEE 754)
//
// Values are stored at 32-bit precision: save rounds doubles to float and
// load widens back, so load(save(s)) is value-exact at 32 bits.

inline constexpr std::uint64_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore& store, const std::string& path);

// Throws DataError on unreadable/truncated files ("truncated checkpoint at
// offset N") and on version mismatch; no partial store is returned.
ParameterStore load_checkpoint(const std::string& path);

}  // namespace ade
