#include "critter/gen/checkpoint.hpp"

#include <string>

#include "critter/util/error.hpp"

namespace critter::gen {

namespace {

const char* kind_name(std::uint32_t k) {
  switch (k) {
    case 1:
      return "rvq";
    case 2:
      return "generator";
    default:
      return "unknown";
  }
}

}  // namespace

void write_checkpoint_header(io::ByteWriter& w, CheckpointKind kind) {
  w.magic("MAGM");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

void read_checkpoint_header(io::ByteReader& r, CheckpointKind expected) {
  r.expect_magic("MAGM");
  if (const auto v = r.u32(); v != kCheckpointVersion) {
    throw ParseError("unsupported MAGM version " + std::to_string(v));
  }
  const auto kind = r.u32();
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw ParseError(std::string("checkpoint holds a ") + kind_name(kind) + " model, expected " +
                     kind_name(static_cast<std::uint32_t>(expected)));
  }
}

CheckpointKind peek_checkpoint_kind(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("MAGM");
  r.u32();
  const auto kind = r.u32();
  if (kind != 1 && kind != 2) throw ParseError("unknown checkpoint kind " + std::to_string(kind));
  return static_cast<CheckpointKind>(kind);
}

}  // namespace critter::gen
