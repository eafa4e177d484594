#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "paflab/model.hpp"

namespace paflab {

inline constexpr char kCheckpointMagic[4] = {'P', 'A', 'F', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all little-endian:
//   "PAFL" | version u32
//   depth u64 | dim u64 | heads u64 | ffn_dim u64 | vocab u64 | max_seq u64 |
//   variant u64 | activation u64 | init_std f64 | seed u64
//   per tensor, in for_each_parameter order: rows u64 | cols u64 | rows*cols f64
// Variant codes: 0 SAF, 1 PAF, 2 NoFFN, 3 NoSkipNoFFN. Activation: 0 gelu, 1 relu.
// Layer-norm epsilon is not stored; it is always kLayerNormEpsilon.

std::vector<std::uint8_t> serialize_model(const Model& m);
/// Throws CorruptCheckpointError on bad magic, unknown version, truncation,
/// trailing bytes or shapes that disagree with the header.
Model deserialize_model(const std::vector<std::uint8_t>& bytes);

/// Throws IoError when the file cannot be written.
void save_checkpoint(const Model& m, const std::filesystem::path& path);
/// Throws IoError when the file cannot be read, CorruptCheckpointError on
/// malformed content.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace paflab
