#pragma once

#include <cstdint>
#include <span>

#include "critter/util/binary_io.hpp"

namespace critter::gen {

// MAGM checkpoints: "MAGM", u32 version, u32 kind, then a kind-specific
// config block and float32 tensors (u32 rows, u32 cols, row-major data).
enum class CheckpointKind : std::uint32_t { kRvq = 1, kGenerator = 2 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint_header(io::ByteWriter& w, CheckpointKind kind);
/// Throws ParseError on a bad magic, version or unexpected kind.
void read_checkpoint_header(io::ByteReader& r, CheckpointKind expected);
CheckpointKind peek_checkpoint_kind(std::span<const std::uint8_t> bytes);

}  // namespace critter::gen
